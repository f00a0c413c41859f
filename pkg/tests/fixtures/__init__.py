# Test fixtures package

