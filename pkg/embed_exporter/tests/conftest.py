import string

import pytest
import torch
from transformers import BertConfig, BertModel, BertTokenizerFast

WORDS = [
    "happy", "cheerful", "aggression", "peaceful", "soft", "marching",
    "calm", "driving", "tension", "speed", "sweet", "weary",
]


@pytest.fixture(scope="session")
def local_checkpoint(tmp_path_factory):
    """A small seed-initialized BERT checkpoint saved to disk.

    Random weights carry no semantics, but the full tokenizer -> model ->
    pooling path is the real one, so structure, determinism and file-format
    behavior are tested end to end without network access.
    """
    root = tmp_path_factory.mktemp("checkpoint")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    vocab += WORDS
    vocab += list(string.ascii_lowercase)
    vocab += [f"##{c}" for c in string.ascii_lowercase]
    (root / "vocab.txt").write_text("\n".join(vocab) + "\n")
    # the vocab source is the first positional parameter across transformers
    # versions (named vocab_file in 4.x, vocab in 5.x)
    tokenizer = BertTokenizerFast(str(root / "vocab.txt"), do_lower_case=True)
    tokenizer.save_pretrained(root)

    torch.manual_seed(0)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=768,
        num_hidden_layers=2,
        num_attention_heads=12,
        intermediate_size=256,
        max_position_embeddings=64,
    )
    BertModel(config).save_pretrained(root)
    return str(root)
