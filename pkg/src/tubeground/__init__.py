"""Spatio-temporal grounding of sentences in videos.

Core pieces: dataset schema + synthetic generator (``datakit``), feature
store (``featstore``), region-graph construction (``region_graph``), the
cross-modal reasoning model (``modeling``), tube decoding (``decoding``),
IoU metrics (``metrics``), training (``training``), and a FastAPI service
(``service``) with a thin CLI (``cli``).
"""

__version__ = "0.1.0"
