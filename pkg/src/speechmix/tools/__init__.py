"""Executable mock tools speaking the external-tool batch protocol."""
