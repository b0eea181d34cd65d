"""Numerical workbench for self-similar blowup in the strong-field Skyrme model (d = 5).

Modules
-------
profiles             closed-form profile, background, potentials, nonlinearity, energy
spectral_modes       Heun recurrence, mode classification, exact inequality certificates
linearized_operator  Chebyshev collocation of the linearized generator and its spectrum
evolution            nonlinear RK4 evolution in similarity coordinates, blowup-time extraction
cli                  command-line front end (`skyrmebench` / `python -m skyrmebench`)
"""
__version__ = "0.1.0"
