"""Configuration, errors, caching and validation shared by every module."""
