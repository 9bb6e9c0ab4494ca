"""Discrete reconfigurable-antenna (RA) array simulator.

Library layers, bottom to top:

- ``special``      -- in-house sine/cosine integrals and Bessel J0
- ``geometry``     -- port grid and active/passive array partition
- ``channel``      -- Saleh-Valenzuela and correlated-Rayleigh synthesis
- ``coupling``     -- induced-EMF impedances and the circuit matrices
- ``precoding``    -- MF/ZF/WF precoders, SINR and sum-rate
- ``solvers``      -- port-selection search (exhaustive, BPSO, tabu, greedy)
- ``loads``        -- load/voltage computation and gradient descent
- ``quantization`` -- quantized-load error model and robust designs
- ``montecarlo``   -- seeded trial orchestration and sweeps
- ``cli``          -- ``ratl run`` / ``ratl verify``

A compiled kernel module (``ratl._cykern``) accelerates the hot fitness
and special-function paths when available; set ``RATL_FORCE_PYTHON=1`` to
pin the pure-Python reference kernels (see ``ratl.backend``).
"""

__version__ = "0.1.0"
