"""Round-level performance simulator and analysis toolkit for HotStuff-family BFT protocols under forking and delay attacks."""

__version__ = "0.1.0"
