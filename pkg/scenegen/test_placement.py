import numpy as np
import pytest

from geomesh.collide import triangles_intersect
from geomesh.mesh import box_mesh
from scenegen.animation import AnimationTrack, instance_mesh_at, swept_mesh
from scenegen.assets import HumanAsset, procedural_human, procedural_object
from scenegen.environment import BadRange, Environment, LabeledMesh, box_room
from scenegen.placement import PlacementFailed, place_humans, spawn_flying_objects


def cube_human(size: float = 0.5) -> HumanAsset:
    base = box_mesh([-size / 2, -size / 2, 0.0], [size / 2, size / 2, size], "cube_human")
    track = AnimationTrack.mesh_sequence(base.vertices[None], base.triangles, 30.0, 10.0)
    return HumanAsset("cube_human", base, track)


def brute_force_touches(a, b) -> bool:
    ca, cb = a.corners(), b.corners()
    return any(triangles_intersect(x, y) for x in ca for y in cb)


def cluttered_room() -> Environment:
    room = box_room((6, 6, 3))
    pillars = tuple(
        LabeledMesh(box_mesh([x, y, 0], [x + 0.6, y + 0.6, 3]), "pillar")
        for x, y in [(1, 1), (3, 2), (4.5, 4.5), (1.5, 4)]
    )
    return Environment(room.meshes + pillars, room.bounds, 0.0, "cluttered")


def test_zero_humans():
    assert place_humans(box_room(), [cube_human()], 0, seed=1) == []


def test_single_cube_human_in_empty_room():
    env = box_room((10, 10, 3))
    [human] = place_humans(env, [cube_human()], 1, seed=3)
    assert human.instance_id == 1
    assert human.semantic_class == "human"
    world = swept_mesh(human.mesh, human.track).transformed(human.placement)
    assert not brute_force_touches(world, env.obstacles())
    assert env.bounds.contains_box(world.bounds(), tol=1e-9)
    assert human.placement.translation[2] == env.floor_height


def test_humans_avoid_pillars_and_each_other():
    env = cluttered_room()
    humans = place_humans(env, [cube_human(0.4), procedural_human(height=1.2, width=0.3, depth=0.2)], 4, seed=8)
    assert [h.instance_id for h in humans] == [1, 2, 3, 4]
    worlds = [swept_mesh(h.mesh, h.track).transformed(h.placement) for h in humans]
    for world in worlds:
        assert not brute_force_touches(world, env.obstacles())
    for i in range(len(worlds)):
        for j in range(i + 1, len(worlds)):
            assert not brute_force_touches(worlds[i], worlds[j])


def test_yaw_only_rotation():
    [human] = place_humans(box_room(), [cube_human()], 1, seed=5)
    rot = human.placement.as_rotation().as_matrix()
    np.testing.assert_allclose(rot[:, 2], [0, 0, 1], atol=1e-12)


def test_human_larger_than_room_fails():
    env = box_room((2, 2, 2))
    with pytest.raises(PlacementFailed) as excinfo:
        place_humans(env, [cube_human(3.0)], 2, seed=1, max_attempts=20)
    assert excinfo.value.placed == 0
    assert excinfo.value.requested == 2


def test_placement_is_deterministic():
    a = place_humans(cluttered_room(), [cube_human()], 3, seed=77)
    b = place_humans(cluttered_room(), [cube_human()], 3, seed=77)
    assert [h.to_dict() for h in a] == [h.to_dict() for h in b]


def test_zero_objects():
    assert spawn_flying_objects(box_room(), [procedural_object()], 0, seed=1) == []


def test_flying_objects_stay_in_bounds_and_cover_duration():
    env = box_room((8, 6, 3))
    objects = spawn_flying_objects(env, [procedural_object()], 5, seed=9, speed_range=(0.5, 1.5), duration=20.0,
                                   first_id=4)
    assert [o.instance_id for o in objects] == [4, 5, 6, 7, 8]
    for obj in objects:
        assert obj.semantic_class == "flying_object"
        assert env.bounds.contains_points(obj.track.positions)
        assert obj.track.duration >= 20.0
        segment = np.linalg.norm(np.diff(obj.track.positions, axis=0), axis=1) / np.diff(obj.track.times)
        assert np.all(segment >= 0.5 - 1e-9) and np.all(segment <= 1.5 + 1e-9)


def test_flying_objects_get_random_scale():
    objects = spawn_flying_objects(box_room(), [procedural_object()], 10, seed=2, scale_range=(0.5, 2.0))
    scales = [o.placement.scale for o in objects]
    assert all(0.5 <= s <= 2.0 for s in scales)
    assert len(set(scales)) > 1


def test_bad_speed_range():
    with pytest.raises(BadRange):
        spawn_flying_objects(box_room(), [procedural_object()], 1, seed=1, speed_range=(0.0, 1.0))


def test_flying_object_mesh_follows_track():
    [obj] = spawn_flying_objects(box_room(), [procedural_object(size=0.2)], 1, seed=4, duration=5.0)
    t = float(obj.track.times[1])
    mesh = instance_mesh_at(obj, t)
    centre = mesh.vertices.mean(axis=0)
    np.testing.assert_allclose(centre, obj.track.positions[1], atol=1e-9)
