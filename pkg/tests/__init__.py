"""Tests for daydream-scope."""
