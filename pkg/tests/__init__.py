"""Tests for HiRRR."""
