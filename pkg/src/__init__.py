"""NBNet subspace-projection image denoiser."""
