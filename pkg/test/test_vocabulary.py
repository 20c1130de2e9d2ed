import pytest

from tokompiler.errors import EmptyCorpus, MalformedVocabFile
from tokompiler.eval_harness import split_units
from tokompiler.corpus_pipeline import ingest
from tokompiler.models import CATEGORIES, TokenStream, VocabConfig
from tokompiler.parser_frontend import extract_functions, parse
from tokompiler.pipeline import TokompilerPipeline
from tokompiler.vocabulary import SPECIALS, Vocabulary, build, oov_counts, oov_rate

ARRAY_DECL_TOKENS = "int func 252 ( ) { int arr 88 [ num 34 + num 842 ] ; }".split()


def make_stream(tokens, unit_id="u"):
    return TokenStream(unit_id=unit_id, tokens=list(tokens))


def test_build_array_decl_without_number_range():
    config = VocabConfig(include_number_range=False)
    vocab = build([make_stream(ARRAY_DECL_TOKENS)], config)

    assert tuple(vocab.tokens[:3]) == SPECIALS
    expected = {"int", "func", "(", ")", "{", "arr", "[", "num", "+", "]", ";", "}", "var", "str"}
    expected |= {"252", "88", "34", "842"}
    assert set(vocab.tokens[3:]) == expected


def test_build_with_full_number_range():
    vocab = build([make_stream(ARRAY_DECL_TOKENS)], number_range=(1, 1000))

    assert all(str(number) in vocab for number in range(1, 1001))
    assert len(vocab) == 3 + 1000 + 14  # specials, numbers, words and punctuation


def test_build_is_order_independent():
    first = build([make_stream(["a", "b"]), make_stream(["c"])])
    second = build([make_stream(["c"]), make_stream(["b", "a"])])

    assert first == second


def test_build_empty_corpus():
    with pytest.raises(EmptyCorpus):
        build([])
    with pytest.raises(EmptyCorpus):
        build([make_stream([])])


def test_save_load_round_trip(tmp_path):
    vocab = build([make_stream(ARRAY_DECL_TOKENS)])
    path = tmp_path / "vocab.txt"

    vocab.save(path)
    loaded = Vocabulary.load(path)

    assert loaded == vocab
    assert loaded.provenance == "loaded"
    assert path.read_bytes().startswith(b"<unk>\n<pad>\n<eos>\n")


@pytest.mark.parametrize(
    "content",
    [
        b"<unk>\r\n<pad>\r\n<eos>\r\n",
        b"<unk>\n<pad>\n<eos>",
        b"<unk>\n<pad>\n<eos>\n\nint\n",
        b"<pad>\n<unk>\n<eos>\n",
        b"<unk>\n<pad>\n<eos>\nint\nint\n",
        b"<unk>\n<pad>\n<eos>\n\xff\n",
    ],
)
def test_load_rejects_malformed_files(tmp_path, content):
    path = tmp_path / "vocab.txt"
    path.write_bytes(content)

    with pytest.raises(MalformedVocabFile):
        Vocabulary.load(path)


def test_specials_only_vocabulary_round_trip(tmp_path):
    path = tmp_path / "vocab.txt"

    Vocabulary().save(path)
    loaded = Vocabulary.load(path)

    assert path.read_bytes() == b"<unk>\n<pad>\n<eos>\n"
    assert loaded == Vocabulary()
    assert len(loaded) == 3


def test_vocabulary_size_cap(synthetic_root):
    pipeline = TokompilerPipeline(seed=4)
    units = list(ingest(synthetic_root))[:30]
    blocks = [block for unit in units for block in extract_functions(parse(unit), unit)]
    streams = [pipeline.tokenize(block).stream for block in blocks]
    numbers = {str(number) for number in range(1, 1001)}

    vocab = build(streams, number_range=(1, 1000))

    words = {token for stream in streams for token in stream.tokens} - numbers - set(CATEGORIES)
    assert len(vocab) <= len(words) + len(CATEGORIES) + len(numbers) + len(SPECIALS)
    assert len(vocab) <= 2000


def test_oov_rate():
    vocab = Vocabulary([*SPECIALS, "int", "("])

    assert oov_counts(vocab, [make_stream(["int", "(", "x", "y"])]) == (2, 4)
    assert oov_rate(vocab, [make_stream(["int", "(", "x", "y"])]) == 0.5


def test_oov_rate_needs_tokens():
    with pytest.raises(EmptyCorpus):
        oov_rate(Vocabulary(), [make_stream([])])


def test_vocabulary_small_and_oov_rare_on_held_out_code(synthetic_root):
    pipeline = TokompilerPipeline(seed=1)
    blocks = [
        block
        for unit in ingest(synthetic_root)
        for block in extract_functions(parse(unit), unit)
    ]
    train, held_out = split_units(blocks, 0.1, seed=1)

    vocab = build(pipeline.tokenize(block).stream for block in train)
    rate = oov_rate(vocab, (pipeline.tokenize(block).stream for block in held_out))

    assert len(vocab) <= 2000
    assert rate < 0.01
