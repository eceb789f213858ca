"""Tests for replica_lab."""
