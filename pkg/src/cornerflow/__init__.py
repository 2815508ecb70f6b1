"""Incompressible vortex transport in polygonal domains with corners.

Velocities come from the disk Green's function transplanted by a Riemann
map (closed form for sectors, Schwarz-Christoffel for polygons); blobs and
tracers are advanced with RK4, and a set of checks probes corner exponents,
boundary confinement near convex corners and collision at concave ones.
"""

__version__ = "0.1.0"
