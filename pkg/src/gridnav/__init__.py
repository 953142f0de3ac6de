"""gridnav: detection, tracking and narration of indoor navigational cues
from 2D LiDAR occupancy grids."""

__version__ = "0.1.0"
