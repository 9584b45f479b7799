"""Novelty detection with an orthogonalized-latent adversarial autoencoder."""
