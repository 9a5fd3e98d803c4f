# Computation services: geometry, noise, correction, simulation and evaluation
