"""Triangle meshes, STL IO, BVH ray casting and mesh collision."""
