"""Service layer for the detection pipeline.

Each module implements one stage of the pipeline (geo primitives, ingestion,
clustering, symbolization, entropy, detection, synthetic generation) as plain
functions over the domain objects. The CLI calls `pipeline_service`, which
wires the stages together through files.
"""
