"""Test suite for zbstein."""
