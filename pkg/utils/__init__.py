"""File, schema and numeric helpers."""
