import math

import numpy as np
import pytest

from geomesh.mesh import Aabb, Transform, box_mesh, empty_mesh, quad_mesh
from gtrender.camera import CameraModel, world_to_camera
from gtrender.render import SceneRenderer, render_ground_truth, validate_frame
from scenegen.animation import AnimationTrack, OutOfRange
from scenegen.assets import AssetInstance, procedural_human, procedural_object
from scenegen.environment import AppearanceRandomization, Environment, LabeledMesh, box_room
from scenegen.scene import AssetLibrary, Scene, SceneConfig, sample_scene
from explore.trajectory import yaw_pitch_roll_to_wxyz

IDENTITY = [1.0, 0.0, 0.0, 0.0]


def static_instance(instance_id, mesh, semantic_class="human", duration=1.0, texture_id=0) -> AssetInstance:
    track = AnimationTrack.rigid_keyframes([0.0, duration], [[0, 0, 0]] * 2, [IDENTITY] * 2)
    return AssetInstance(instance_id, semantic_class, "test", mesh, track, Transform(), texture_id)


def make_scene(env_meshes, instances, duration=1.0) -> Scene:
    meshes = tuple(LabeledMesh(m, label) for m, label in env_meshes) or (LabeledMesh(empty_mesh(), "floor"),)
    env = Environment(meshes, Aabb([-10, -10, -10], [10, 10, 10]), -10.0, "test")
    appearance = AppearanceRandomization(tuple(range(len(meshes))), (1.0, 1.0, 1.0), 1.0)
    return Scene(env, appearance, tuple(instances), 0, duration)


def unit_square_at(x: float):
    return quad_mesh([[x, -0.5, -0.5], [x, 0.5, -0.5], [x, 0.5, 0.5], [x, -0.5, 0.5]])


def test_empty_scene():
    cam = CameraModel(16, 12, 10.0, 10.0)
    frame = render_ground_truth(make_scene([], []), cam, Transform(), 0.0)
    assert not frame.instance_map.any()
    assert frame.boxes == () and frame.masks == ()
    assert np.all(np.isinf(frame.depth))
    assert not frame.rgb.any()


def test_square_at_two_metres_projects_to_fifty_pixels():
    cam = CameraModel(100, 100, 100.0, 100.0)
    scene = make_scene([], [static_instance(1, unit_square_at(2.0))])
    frame = render_ground_truth(scene, cam, Transform(), 0.5)
    (instance_id, box), = frame.boxes
    assert instance_id == 1
    assert box.to_list() == [25, 25, 50, 50]
    assert frame.masks[0][1].area == 2500
    np.testing.assert_allclose(frame.depth[frame.instance_map == 1], 2.0, rtol=1e-12)
    assert np.all(frame.semantic_map[frame.instance_map == 1] == 1)
    assert np.all(frame.rgb[frame.instance_map == 1] > 0)


def test_human_behind_wall_is_hidden():
    cam = CameraModel(40, 30, 20.0, 20.0)
    wall = quad_mesh([[1.0, -5, -5], [1.0, 5, -5], [1.0, 5, 5], [1.0, -5, 5]])
    scene = make_scene([(wall, "floor")], [static_instance(1, box_mesh([3, -0.3, -0.8], [3.4, 0.3, 0.9]))])
    frame = render_ground_truth(scene, cam, Transform(), 0.0)
    assert not frame.instance_map.any()
    assert frame.boxes == ()
    assert np.all(np.isfinite(frame.depth))
    np.testing.assert_allclose(frame.depth, 1.0, rtol=1e-9)


def test_near_clip_skips_surfaces_at_the_lens():
    cam = CameraModel(8, 8, 4.0, 4.0)
    scene = make_scene([(unit_square_at(0.0005), "floor")], [static_instance(1, unit_square_at(1.0))])
    frame = render_ground_truth(scene, cam, Transform(), 0.0)
    assert frame.instance_map[4, 4] == 1


def test_out_of_range_time():
    scene = make_scene([], [static_instance(1, unit_square_at(2.0))], duration=1.0)
    renderer = SceneRenderer(scene, CameraModel(8, 8, 4.0, 4.0))
    with pytest.raises(OutOfRange):
        renderer.render(Transform(), 1.5)


def _oracle_hit(origin, direction, tri):
    e1, e2 = tri[1] - tri[0], tri[2] - tri[0]
    p = np.cross(direction, e2)
    det = float(np.dot(e1, p))
    if abs(det) < 1e-12:
        return None
    s = origin - tri[0]
    u = float(np.dot(s, p)) / det
    q = np.cross(s, e1)
    v = float(np.dot(direction, q)) / det
    t = float(np.dot(e2, q)) / det
    if u < 0 or v < 0 or u + v > 1 or t < 1e-3:
        return None
    return t


def test_matches_pixel_loop_oracle():
    floor = quad_mesh([[-4, -4, -0.9], [6, -4, -0.9], [6, 4, -0.9], [-4, 4, -0.9]])
    person = box_mesh([2.13, -0.71, -0.87], [2.47, -0.19, 0.83])
    crate = box_mesh([-0.17, -0.13, -0.11], [0.19, 0.17, 0.13])
    spin = AnimationTrack.rigid_keyframes(
        [0.0, 1.0], [[1.61, 0.37, 0.21], [1.81, 0.57, 0.31]], [IDENTITY, yaw_pitch_roll_to_wxyz(0.9, 0.4, 0.1)],
    )
    scene = make_scene(
        [(floor, "floor")],
        [static_instance(1, person), AssetInstance(2, "flying_object", "crate", crate, spin, Transform(), 3)],
    )
    cam = CameraModel(24, 18, 14.3, 14.3)
    pose = Transform(yaw_pitch_roll_to_wxyz(-0.13, 0.07, 0.0), [0.03, 0.02, 0.11])
    t = 0.37
    frame = render_ground_truth(scene, cam, pose, t)

    env_tris = floor.corners()
    person_tris = person.corners()
    crate_tris = crate.transformed(spin.transform_at(t)).corners()
    rot = pose.as_rotation().as_matrix()
    for r in range(cam.height):
        for c in range(cam.width):
            body = np.array([1.0, -(c + 0.5 - cam.cx) / cam.fx, -(r + 0.5 - cam.cy) / cam.fy])
            d = rot @ (body / np.linalg.norm(body))
            best_t, best_id = math.inf, 0
            for owner, tris in ((0, env_tris), (1, person_tris), (2, crate_tris)):
                for tri in tris:
                    hit = _oracle_hit(pose.translation, d, tri)
                    if hit is not None and hit < best_t:
                        best_t, best_id = hit, owner
            assert frame.instance_map[r, c] == best_id, (r, c)
            if math.isinf(best_t):
                assert math.isinf(frame.depth[r, c])
            else:
                forward = best_t / np.linalg.norm(body)
                assert frame.depth[r, c] == pytest.approx(forward, rel=1e-9)


def test_row_blocks_match_full_frame():
    floor = quad_mesh([[-4, -4, -0.9], [6, -4, -0.9], [6, 4, -0.9], [-4, 4, -0.9]])
    scene = make_scene([(floor, "floor")], [static_instance(1, box_mesh([2, -0.4, -0.9], [2.4, 0.3, 0.8]))])
    renderer = SceneRenderer(scene, CameraModel(20, 16, 12.0, 12.0))
    full = renderer.render_layers(Transform(), 0.2)
    parts = [renderer.render_layers(Transform(), 0.2, rows=np.arange(i, min(i + 5, 16))) for i in range(15, -1, -5)]
    parts = parts[::-1]
    np.testing.assert_array_equal(np.concatenate([p.instance for p in parts]), full.instance)
    np.testing.assert_array_equal(np.concatenate([p.depth for p in parts]), full.depth)
    np.testing.assert_array_equal(np.concatenate([p.rgb for p in parts]), full.rgb)


def test_world_to_camera_projects_back_to_pixel():
    cam = CameraModel(32, 24, 20.0, 18.0)
    pose = Transform(yaw_pitch_roll_to_wxyz(0.4, 0.2, 0.0), [1.0, -2.0, 0.5])
    body_point = np.array([[3.0, 0.5, -0.25]])
    world = pose.apply(body_point)
    uv = cam.project(world_to_camera(pose, world))
    np.testing.assert_allclose(uv[0], [16 - 20.0 * 0.5 / 3.0, 12 + 18.0 * 0.25 / 3.0])


def test_sampled_scene_frames_keep_invariants():
    library = AssetLibrary(
        humans=(procedural_human(height=1.7, duration=3.0),),
        flying_objects=(procedural_object(size=0.4),),
    )
    env = box_room((6.0, 5.0, 3.0))
    scene = sample_scene(env, library, 8, SceneConfig(human_count=(3, 3), object_count=(2, 2), duration=3.0))
    renderer = SceneRenderer(scene, CameraModel.from_fov(40, 30, math.radians(90.0)))
    table = scene.class_table()
    seen = set()
    for k, yaw in enumerate(np.linspace(0.0, 2 * math.pi, 12, endpoint=False)):
        pose = Transform(yaw_pitch_roll_to_wxyz(yaw, 0.2, 0.0), [3.0, 2.5, 1.6])
        frame = renderer.render(pose, k * 0.25, frame=k)
        validate_frame(frame, table)
        total = sum(mask.area for _, mask in frame.masks)
        assert total <= frame.instance_map.size
        seen.update(frame.instance_ids())
    assert seen & {h.instance_id for h in scene.humans}
