"""Vision-based reactive navigation for a nano-drone with offloaded obstacle detection."""

__version__ = "0.1.0"
