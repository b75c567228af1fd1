"""
Test suite for sh-transfer.

Unit, integration and CLI tests for the transfer engines, the foliation
pipeline and the check runners.
"""
