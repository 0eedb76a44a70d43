from modelsvc.tokenizer import PAD_ID, PIECE_LEN, encode_words, piece_id, word_pieces


def test_pieces_are_fixed_length_chunks():
    assert word_pieces("unbelievable") == ["unbe", "liev", "able"]
    assert word_pieces("cat") == ["cat"]
    assert word_pieces("abcdefgh") == ["abcd", "efgh"]


def test_pieces_casefold():
    assert word_pieces("Mercer") == word_pieces("mercer") == word_pieces("MERCER")


def test_empty_word_gets_placeholder_piece():
    assert word_pieces("") == ["␀"]


def test_piece_ids_stay_inside_vocab_and_avoid_pad():
    vocab = 512
    for word in ["said", "board", "approved", "x" * 40, "", "émigré", "数据"]:
        for piece in word_pieces(word):
            pid = piece_id(piece, vocab)
            assert 1 <= pid < vocab
            assert pid != PAD_ID


def test_piece_ids_deterministic():
    assert piece_id("said", 2048) == piece_id("said", 2048)


def test_encode_words_gives_each_word_its_own_ids():
    per_word = encode_words(["hello", "hi"], 2048)
    assert len(per_word) == 2
    assert len(per_word[0]) == len(word_pieces("hello"))
    assert len(per_word[1]) == 1
    assert all(i != PAD_ID for ids in per_word for i in ids)
    assert PIECE_LEN == 4
