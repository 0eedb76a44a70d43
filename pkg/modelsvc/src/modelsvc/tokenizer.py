"""Hash-based subword tokenizer.

There is no vocabulary file: a word is case-folded, cut into fixed-width
character pieces, and each piece is mapped to an id by hashing. The mapping
is a pure function of the string and the vocabulary size, so any two
processes agree on it without sharing state, and checkpoints only need to
record the vocabulary size to stay compatible.
"""

import zlib

PAD_ID = 0
PIECE_LEN = 4


def word_pieces(word: str) -> list[str]:
    folded = word.casefold()
    if not folded:
        return ["␀"]  # stand-in so empty strings still occupy a slot
    return [folded[i:i + PIECE_LEN] for i in range(0, len(folded), PIECE_LEN)]


def piece_id(piece: str, vocab_size: int) -> int:
    # ids 1..vocab_size-1; 0 is padding
    return 1 + zlib.crc32(piece.encode("utf-8")) % (vocab_size - 1)


def encode_words(words: list[str], vocab_size: int) -> list[list[int]]:
    """Subword ids per word, each word contributing at least one id."""
    return [[piece_id(p, vocab_size) for p in word_pieces(w)] for w in words]
