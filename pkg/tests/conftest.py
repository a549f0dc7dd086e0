"""Shared fixtures: a small trained three-model bundle and its data files."""

import pytest

from scale_sense.corpus import (
    build_instances,
    demo_config,
    generate_synthetic_corpus,
    split_dataset,
    write_instances,
    write_recipes,
)
from scale_sense.encoder import EncoderConfig
from scale_sense.pipeline import ModelPredictors
from scale_sense.query import Task
from scale_sense.train import TrainConfig, build_corpus_vocab, save_checkpoint, train_task


@pytest.fixture(scope="session")
def model_bundle(tmp_path_factory):
    """Three small task models trained on a shared synthetic corpus.

    Returns (predictors, instances, directory) where the directory holds
    type/unit/quantity checkpoints plus train/valid/test instance files.
    """
    root = tmp_path_factory.mktemp("bundle")
    records, _ = generate_synthetic_corpus(demo_config(120), seed=9)
    write_recipes(root / "recipes.jsonl", records)
    instances, _ = build_instances(records, seed=9)
    train, valid, test = split_dataset(instances, seed=9)
    for name, part in (("train", train), ("valid", valid), ("test", test)):
        write_instances(root / f"{name}.jsonl", part)

    vocab = build_corpus_vocab(train)
    encoder = EncoderConfig(dim=32, layers=1, heads=2, max_len=64)
    models = {}
    for task in Task:
        config = TrainConfig(
            task=task,
            encoder=encoder,
            batch_size=32,
            max_steps=120,
            eval_every=40,
            patience=50,
            seed=11,
        )
        result = train_task(train, valid, config, vocab=vocab)
        save_checkpoint(root / f"{task.value}.sscp", result.checkpoint)
        models[task] = result.model
    predictors = ModelPredictors(models[Task.TYPE], models[Task.UNIT], models[Task.QUANTITY])
    return predictors, test, root
