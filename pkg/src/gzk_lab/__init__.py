"""
GZK analyticity lab - pseudo-spectral simulator for 2D Zakharov-Kuznetsov equations.

Evolves ZK (k=1) and modified ZK (k=2) on periodic boxes, evaluates Gevrey and
Bourgain norms, tracks the radius of spatial analyticity, and probes the
bilinear, trilinear and almost-conservation estimates numerically.
"""

from dotenv import load_dotenv

# Load environment variables from .env file so GZK_* settings are visible
load_dotenv()

__version__ = "0.1.0"
