"""Image I/O, manifests and shared error types."""
