"""Visible-point meshes and traversability maps for ground robots."""

from .buffer import BufferConfig, Scan, ScanBuffer, voxel_filter
from .errors import (
    DataError,
    DegeneracyError,
    DomainError,
    EmptyCloudError,
    GeometryError,
    OrderingError,
    OvpcError,
    ParseError,
    SizeError,
    StateError,
    StructuralError,
)
from .geometry import PointCloud, Pose3, TopologyReport, TriangleMesh, mesh_topology_check, transform_cloud
from .ghpr import GhprConfig, VisibleResult, build_ovpc_mesh, ghpr_visible, kernel_value
from .hull import HullConfig, HullMesh, hull_contains, quickhull3
from .navmap import CollisionReport, RobotBox, Se2State, collision_check, nearest_visible, project_state
from .traversability import NavMap, TraversabilityConfig, build_navmap, face_labels, vertex_attributes

__version__ = "0.1.0"
