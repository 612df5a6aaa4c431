"""
Analysis components: attention mask inspection and architecture comparison.
"""

from .masks import dump_masks, mask_statistics, read_pgm, to_8bit, write_pgm
from .compare import (
    TowerIncrement,
    architecture_label,
    compare_configs,
    params_table,
    tower_increment,
)

__all__ = [
    "dump_masks",
    "mask_statistics",
    "read_pgm",
    "to_8bit",
    "write_pgm",
    "TowerIncrement",
    "architecture_label",
    "compare_configs",
    "params_table",
    "tower_increment",
]
