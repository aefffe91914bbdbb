from .cluster import kmeans
from .database import (
    Database,
    PerceptionConfig,
    associate,
    build_database,
    infer_k,
    load_database,
    prepare_goal_regions,
    save_database,
)
from .descriptor import GridPooledDescriptor
from .regions import ObjectRegion, RegionCrop, SquarePadMap, extract_regions

__all__ = [
    "kmeans",
    "Database",
    "PerceptionConfig",
    "associate",
    "build_database",
    "infer_k",
    "load_database",
    "prepare_goal_regions",
    "save_database",
    "GridPooledDescriptor",
    "ObjectRegion",
    "RegionCrop",
    "SquarePadMap",
    "extract_regions",
]
