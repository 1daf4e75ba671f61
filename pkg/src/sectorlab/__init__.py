"""Spectral statistics of graphene sector billiards.

Modules
-------
lattice      honeycomb sector flakes with zigzag or armchair straight edges
hamiltonian  sparse tight-binding Hamiltonians
spectra      dense spectra, inertia counts and certified window eigensolves
unfold       staircase unfolding (polynomial or infinite-lattice DOS)
rmtstats     NNSD, Delta_3 and random-matrix references
qbilliard    Dirichlet quantum billiard on a circular sector
lengthspec   length spectra and periodic orbits of the sector billiard
cli          config-driven experiment runner
"""

__version__ = "0.1.0"
