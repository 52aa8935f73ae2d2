"""Simulation toolkit for cavity-based bucket-brigade QRAM.

Modules
-------
fock          truncated multimode Fock spaces, operators, superoperators
gates         joint-parity, ZZ, CZ, CSWAP and data-copy unitaries and pulse schedules
noise         parameter presets, jump operators and the Lindblad integrator
czfid         noisy CZ channels, post-selected fidelities and scaling sweeps
gue           giant-unidirectional-emitter state transfer
waveguide_io  input-output scattering of travelling wave packets
query         resource counts, infidelity bounds and success rates
circuit       full query circuit and its statevector oracle check
cli           command-line front end
"""

__version__ = "0.1.0"
