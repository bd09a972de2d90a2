"""Configuration package.

Process-level settings are environment-driven (see `settings`); run-level
configuration lives in typed dataclasses (see `schema`).
"""
