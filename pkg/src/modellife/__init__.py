"""Model life extension: closed-loop MPM estimation for MPC process models."""
