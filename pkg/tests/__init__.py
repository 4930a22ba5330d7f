"""Tests for addtwist."""
