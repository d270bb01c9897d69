"""JSON and dynamic-loading helpers shared by the pipeline stages."""
