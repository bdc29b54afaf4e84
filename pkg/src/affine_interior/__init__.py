"""Certificates and numerical evidence for self-affine sets with interior."""
from .attractor import (IfsInstance, OccupancyGrid, chaos_sample, code_point, code_points,
                        detect_interior, measure_lower_evidence, render_cylinder_cover,
                        truncation_depth)
from .config import ConfigError, SystemConfig, parse_config
from .dimension import (AffinityBracket, TValueCertificate, affinity_bracket,
                        certify_t_above_d, g_t, phi_s)
from .linalg import DomainError, MapTuple, word_det, word_product
from .measures import BlockBernoulli, build_block_measure, verify_cylinder_bound
from .splitting import BlockClass, SplitCertificate, build_split, find_certified_block, verify_split

__all__ = [
    "AffinityBracket", "BlockBernoulli", "BlockClass", "ConfigError", "DomainError",
    "IfsInstance", "MapTuple", "OccupancyGrid", "SplitCertificate", "SystemConfig",
    "TValueCertificate", "affinity_bracket", "build_block_measure", "build_split",
    "certify_t_above_d", "chaos_sample", "code_point", "code_points", "detect_interior",
    "find_certified_block", "g_t", "measure_lower_evidence", "parse_config", "phi_s",
    "render_cylinder_cover", "truncation_depth", "verify_cylinder_bound", "verify_split",
    "word_det", "word_product",
]
