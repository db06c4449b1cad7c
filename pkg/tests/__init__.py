"""Tests for the welfare mechanisms library."""
