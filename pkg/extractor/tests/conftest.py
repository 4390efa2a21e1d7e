"""Fixtures: small 4-layer encoders built offline with seeded weights.

The sandbox has no model-hub access, so "a small public 4+ layer encoder"
is realized structurally: standard encoder architectures (BERT, ViT,
Wav2Vec2) at toy sizes, randomly initialized with a fixed seed, saved to
disk, and loaded back by path through the Auto* machinery — frozen weights
from the extractor's point of view.
"""

import numpy as np
import pytest
import torch


@pytest.fixture(scope="session")
def tiny_bert_factory(tmp_path_factory):
    from transformers import BertConfig, BertModel, BertTokenizer

    vocab = [
        "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
        "the", "a", "dog", "cat", "runs", "sits", "quickly",
        "red", "blue", "house", "tree", "sings", "bird",
    ]

    def build(seed: int, num_layers: int = 4) -> str:
        root = tmp_path_factory.mktemp(f"bert{seed}_{num_layers}")
        vocab_path = root / "vocab.txt"
        vocab_path.write_text("\n".join(vocab) + "\n")
        tokenizer = BertTokenizer(str(vocab_path))
        config = BertConfig(
            vocab_size=len(vocab),
            hidden_size=32,
            num_hidden_layers=num_layers,
            num_attention_heads=4,
            intermediate_size=64,
            max_position_embeddings=64,
        )
        torch.manual_seed(seed)
        model = BertModel(config)
        model.save_pretrained(root)
        tokenizer.save_pretrained(root)
        return str(root)

    return build


@pytest.fixture(scope="session")
def tiny_vit_factory(tmp_path_factory):
    from transformers import ViTConfig, ViTImageProcessor, ViTModel

    def build(seed: int) -> str:
        root = tmp_path_factory.mktemp(f"vit{seed}")
        config = ViTConfig(
            hidden_size=32,
            num_hidden_layers=4,
            num_attention_heads=4,
            intermediate_size=64,
            image_size=32,
            patch_size=8,
            num_channels=3,
        )
        torch.manual_seed(seed)
        model = ViTModel(config)
        model.save_pretrained(root)
        ViTImageProcessor(size={"height": 32, "width": 32}).save_pretrained(root)
        return str(root)

    return build


@pytest.fixture(scope="session")
def tiny_wav2vec_factory(tmp_path_factory):
    from transformers import Wav2Vec2Config, Wav2Vec2FeatureExtractor, Wav2Vec2Model

    def build(seed: int) -> str:
        root = tmp_path_factory.mktemp(f"w2v{seed}")
        config = Wav2Vec2Config(
            hidden_size=32,
            num_hidden_layers=4,
            num_attention_heads=4,
            intermediate_size=64,
            conv_dim=(16, 16, 16),
            conv_kernel=(10, 3, 3),
            conv_stride=(5, 2, 2),
            num_feat_extract_layers=3,
            num_conv_pos_embeddings=16,
            num_conv_pos_embedding_groups=4,
        )
        torch.manual_seed(seed)
        model = Wav2Vec2Model(config)
        model.save_pretrained(root)
        Wav2Vec2FeatureExtractor().save_pretrained(root)
        return str(root)

    return build


@pytest.fixture(scope="session")
def image_stimuli(tmp_path_factory):
    from PIL import Image

    root = tmp_path_factory.mktemp("images")
    paths = []
    for i in range(6):
        rng = np.random.default_rng(i)
        pixels = rng.uniform(0, 255, (32, 32, 3)).astype("uint8")
        path = root / f"img-{i:03d}.png"
        Image.fromarray(pixels).save(path)
        paths.append(str(path))
    return paths


@pytest.fixture(scope="session")
def wav_stimuli(tmp_path_factory):
    from scipy.io import wavfile

    root = tmp_path_factory.mktemp("audio")
    paths = []
    for i in range(3):
        t = np.linspace(0, 0.5, 8000, endpoint=False)
        wave = (0.5 * np.sin(2 * np.pi * (200 + 100 * i) * t) * 32767).astype(
            np.int16
        )
        path = root / f"snd-{i:03d}.wav"
        wavfile.write(path, 16000, wave)
        paths.append(str(path))
    return paths


TEXTS = (
    "the dog runs quickly",
    "a cat sits",
    "the red house",
    "a blue tree",
    "the bird sings",
    "a dog sits quickly",
)


@pytest.fixture(scope="session")
def text_stimuli():
    return TEXTS
