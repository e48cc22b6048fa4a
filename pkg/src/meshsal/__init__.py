"""Saliency tooling for textured triangle meshes."""

from .mesh import LoadOptions, TexturedMesh, load_mesh, ring_neighbors, save_mesh
from .texture import TextureImage, load_texture, sample_uv

__version__ = "0.1.0"

__all__ = [
    "LoadOptions",
    "TexturedMesh",
    "TextureImage",
    "load_mesh",
    "load_texture",
    "ring_neighbors",
    "sample_uv",
    "save_mesh",
]
