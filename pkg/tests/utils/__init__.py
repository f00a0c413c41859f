# Test utilities package

