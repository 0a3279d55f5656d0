"""splatworld: a dual Gaussian-particle world model.

Particles are simulated with position-based dynamics under physical priors,
attached Gaussians render the predicted scene, and photometric disagreement
with observed images becomes corrective forces on the particles.
"""

__version__ = "0.1.0"
