"""Environment help configuration modules."""
