from pathlib import Path

from higemine.config import PipelineConfig

FIXTURES = Path(__file__).parent / "fixtures"

SMALL = dict(
    embedding_dim=16,
    gcn1_dim=16,
    gcn2_dim=16,
    dense_hidden=16,
    label_out_dim=16,
    learning_rate=0.01,
    window=10,
)


def small_config(**overrides) -> PipelineConfig:
    values = dict(SMALL, epochs=300, patience=0)
    values.update(overrides)
    return PipelineConfig(**values)
