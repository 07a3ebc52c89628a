"""Filter feature selection and classifier evaluation for memory-forensics malware data."""

__version__ = "0.1.0"
