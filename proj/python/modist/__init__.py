"""Motion-distilled video representation learning on synthetic scenes."""

from modist._core import (
    FLOW_EDGE_CLAMP,
    ModistError,
    generate_corpus,
    info_nce,
    read_records,
    run_cli,
    sobel_edge_map,
)

__all__ = [
    "FLOW_EDGE_CLAMP",
    "ModistError",
    "generate_corpus",
    "info_nce",
    "read_records",
    "run_cli",
    "sobel_edge_map",
]
