# Test package initialization

