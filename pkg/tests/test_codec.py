import numpy as np
import pytest

from stealthpath import indexing
from stealthpath.codec import (
    CodeParams,
    DecodeResult,
    ReceivedWord,
    ResourceBudgetError,
    Transmission,
    _ChunkedStore,
    build_direct_code,
    build_layered_code,
    decode_erasure,
    decode_overwrite,
    dump_codewords,
    encode,
    matching_messages,
    pair_membership,
    survey_restrictions,
)
from stealthpath.probkit import (
    ConditionalKernel,
    Distribution,
    JointDistribution,
    TypicalityParams,
)
from stealthpath.ratesolver import NetworkModel


def uniform_model(c=3, z=1):
    inn = JointDistribution.from_factors([Distribution.uniform(2)] * c)
    return NetworkModel(c, z, (2,) * c, inn)


MODEL = uniform_model()
UNIFORM8 = MODEL.innocent


def test_code_params_message_count():
    assert CodeParams(n=8, rate=1.5, seed=0).message_count == 4096
    assert CodeParams(n=1, rate=0.5, seed=0).message_count == 1
    with pytest.raises(ValueError):
        CodeParams(n=0, rate=1.0, seed=0)
    with pytest.raises(ValueError):
        CodeParams(n=4, rate=0.0, seed=0)


def test_astronomical_message_count_raises():
    with pytest.raises(ResourceBudgetError):
        CodeParams(n=1000, rate=1.5, seed=0).message_count
    # over the hard message budget but representable
    with pytest.raises(ResourceBudgetError):
        build_direct_code(UNIFORM8, CodeParams(n=64, rate=1.7, seed=0))


def test_direct_code_deterministic():
    params = CodeParams(n=6, rate=1.0, seed=42)
    a = build_direct_code(UNIFORM8, params)
    b = build_direct_code(UNIFORM8, params)
    for m in range(1, a.message_count + 1):
        np.testing.assert_array_equal(a.codeword(m), b.codeword(m))
    c = build_direct_code(UNIFORM8, CodeParams(n=6, rate=1.0, seed=43))
    assert any(not np.array_equal(a.codeword(m), c.codeword(m))
               for m in range(1, a.message_count + 1))


def test_single_codeword_code():
    params = CodeParams(n=4, rate=0.1, seed=9)
    code = build_direct_code(UNIFORM8, params)
    assert code.message_count == 1
    np.testing.assert_array_equal(code.codeword(1),
                                  build_direct_code(UNIFORM8, params).codeword(1))


def test_point_mass_code_is_constant():
    pm = JointDistribution((2, 2, 2), np.eye(8)[5])
    code = build_direct_code(pm, CodeParams(n=5, rate=1.0, seed=3))
    for m in range(1, code.message_count + 1):
        assert (code.codeword(m) == 5).all()


def test_codeword_symbol_frequencies_near_uniform():
    # N=4096 draws of 8 symbols each: empirical frequency within 0.02
    code = build_direct_code(UNIFORM8, CodeParams(n=8, rate=1.5, seed=1))
    counts = np.zeros(8)
    for _, block in code.chunks():
        counts += np.bincount(block.ravel(), minlength=8)
    freq = counts / counts.sum()
    np.testing.assert_allclose(freq, np.full(8, 1 / 8), atol=0.02)


def test_streaming_store_matches_materialized():
    mass = UNIFORM8.mass
    kw = dict(mass=mass, n=5, seed=17, count=300, label="codeword-chunk")
    mat = _ChunkedStore(materialize=True, **kw)
    stream = _ChunkedStore(materialize=False, **kw)
    for m in (0, 1, 150, 299):
        np.testing.assert_array_equal(mat.codeword(m), stream.codeword(m))
    blocks = list(stream.chunks())
    np.testing.assert_array_equal(np.concatenate([b for _, b in blocks]),
                                  np.concatenate([b for _, b in mat.chunks()]))


def test_layered_code_validation_and_determinism():
    p_u = Distribution.uniform(3)
    kern = ConditionalKernel.constant(3, UNIFORM8.as_distribution())
    params = CodeParams(n=6, rate=0.5, seed=2)
    a = build_layered_code(p_u, kern, params, (2, 2, 2))
    b = build_layered_code(p_u, kern, params, (2, 2, 2))
    for m in range(1, a.message_count + 1):
        np.testing.assert_array_equal(a.u_codeword(m), b.u_codeword(m))
    with pytest.raises(ValueError):
        build_layered_code(Distribution.uniform(2), kern, params, (2, 2, 2))
    with pytest.raises(ValueError):
        build_layered_code(p_u, kern, params, (2, 2))


def test_transmission_status_message_consistency():
    links = np.zeros((3, 4), dtype=np.int64)
    with pytest.raises(ValueError):
        Transmission(0, 3, links)
    with pytest.raises(ValueError):
        Transmission(1, 0, links)
    Transmission(0, 0, links)


def test_decode_result_validation():
    with pytest.raises(ValueError):
        DecodeResult("message", message=0)
    DecodeResult("innocent")


def test_encode_innocent_reproducible():
    code = build_direct_code(UNIFORM8, CodeParams(n=10, rate=0.5, seed=4))
    t1 = encode(code, MODEL, 0, 0, 99)
    t2 = encode(code, MODEL, 0, 0, 99)
    np.testing.assert_array_equal(t1.links, t2.links)
    assert t1.status == 0 and t1.message == 0
    t3 = encode(code, MODEL, 0, 0, 100)
    assert not np.array_equal(t1.links, t3.links)


def test_encode_direct_returns_codeword():
    code = build_direct_code(UNIFORM8, CodeParams(n=6, rate=1.0, seed=4))
    tx = encode(code, MODEL, 1, 7, 5)
    np.testing.assert_array_equal(tx.links, code.codeword_links(7))
    with pytest.raises(ValueError):
        encode(code, MODEL, 1, code.message_count + 1, 5)
    with pytest.raises(ValueError):
        encode(code, MODEL, 0, 3, 5)


def test_encode_layered_identity_kernel_is_u_codeword():
    code = build_layered_code(UNIFORM8.as_distribution(), ConditionalKernel.identity(8),
                              CodeParams(n=6, rate=1.0, seed=4), (2, 2, 2))
    tx = encode(code, MODEL, 1, 7, 5)
    np.testing.assert_array_equal(
        indexing.pack_links(tx.links, (2, 2, 2)), code.u_codeword(7))


def test_encode_layered_resamples_per_transmission():
    noisy = ConditionalKernel.constant(8, UNIFORM8.as_distribution())
    code = build_layered_code(UNIFORM8.as_distribution(), noisy,
                              CodeParams(n=12, rate=0.5, seed=4), (2, 2, 2))
    tx1 = encode(code, MODEL, 1, 1, 5)
    tx2 = encode(code, MODEL, 1, 1, 6)
    assert not np.array_equal(tx1.links, tx2.links)
    np.testing.assert_array_equal(encode(code, MODEL, 1, 1, 5).links, tx1.links)


def identity_layered(n, rate, seed):
    return build_layered_code(UNIFORM8.as_distribution(), ConditionalKernel.identity(8),
                              CodeParams(n=n, rate=rate, seed=seed), (2, 2, 2))


def erase(links, erased_links, c=3):
    erased = np.zeros(c, dtype=bool)
    erased[list(erased_links)] = True
    out = links.copy()
    out[erased] = 0
    return ReceivedWord(links=out, erased=erased)


def test_decode_erasure_round_trip():
    code = identity_layered(24, 0.5, 11)
    tp = TypicalityParams(0.6)
    for m in (1, 5, code.message_count):
        tx = encode(code, MODEL, 1, m, 100 + m)
        for j in ((), (0,), (1,), (2,)):
            result = decode_erasure(code, erase(tx.links, j), tp, MODEL)
            assert result.verdict == "message" and result.message == m


def test_decode_erasure_innocent():
    code = identity_layered(24, 0.5, 11)
    tp = TypicalityParams(0.6)
    hits = 0
    for t in range(50):
        tx = encode(code, MODEL, 0, 0, 2000 + t)
        if decode_erasure(code, erase(tx.links, (0,)), tp, MODEL).verdict == "innocent":
            hits += 1
    assert hits >= 48  # false codeword matches require an exact 24-symbol hit


def test_decode_erasure_all_links_erased():
    code = identity_layered(8, 0.5, 11)
    tx = encode(code, MODEL, 1, 1, 7)
    result = decode_erasure(code, erase(tx.links, (0, 1, 2)), TypicalityParams(0.6))
    assert result.verdict == "error"


def test_decode_erasure_too_many_erasures_with_model():
    code = identity_layered(8, 0.5, 11)
    tx = encode(code, MODEL, 1, 1, 7)
    result = decode_erasure(code, erase(tx.links, (0, 1)), TypicalityParams(0.6), MODEL)
    assert result.verdict == "error" and result.examined_sets == 0


def test_decode_overwrite_honest_word():
    code = build_direct_code(UNIFORM8, CodeParams(n=24, rate=0.5, seed=11))
    for m in (1, 9, code.message_count):
        tx = encode(code, MODEL, 1, m, 0)
        rx = ReceivedWord(links=tx.links.copy(), erased=np.zeros(3, dtype=bool))
        result = decode_overwrite(code, rx, MODEL)
        assert result.verdict == "message" and result.message == m
        assert result.examined_sets == 4


def test_decode_overwrite_innocent():
    code = build_direct_code(UNIFORM8, CodeParams(n=24, rate=0.5, seed=11))
    hits = 0
    for t in range(50):
        tx = encode(code, MODEL, 0, 0, 3000 + t)
        rx = ReceivedWord(links=tx.links.copy(), erased=np.zeros(3, dtype=bool))
        if decode_overwrite(code, rx, MODEL).verdict == "innocent":
            hits += 1
    assert hits >= 48


def test_decode_overwrite_rejects_erasures():
    code = build_direct_code(UNIFORM8, CodeParams(n=4, rate=0.5, seed=11))
    rx = ReceivedWord(links=np.zeros((3, 4), dtype=np.int64),
                      erased=np.array([True, False, False]))
    with pytest.raises(ValueError):
        decode_overwrite(code, rx, MODEL)


def test_decode_overwrite_constructed_ambiguity():
    # Find two messages agreeing on link 2, then hand the decoder a word that
    # matches m on links {1,2} and m' on links {0,2}: the list holds both.
    code = build_direct_code(UNIFORM8, CodeParams(n=2, rate=2.0, seed=0))
    found = None
    for m in range(1, code.message_count + 1):
        for mp in range(m + 1, code.message_count + 1):
            a, b = code.codeword_links(m), code.codeword_links(mp)
            if np.array_equal(a[2], b[2]) and not np.array_equal(a, b):
                found = (m, mp)
                break
        if found:
            break
    assert found is not None
    m, mp = found
    y = code.codeword_links(m).copy()
    y[0] = code.codeword_links(mp)[0]
    rx = ReceivedWord(links=y, erased=np.zeros(3, dtype=bool))
    assert decode_overwrite(code, rx, MODEL).verdict == "error"


def test_matching_messages_packed_and_fallback_agree():
    # n=40 binary pairs exceed 63-bit packing, forcing the row-compare path
    packed_code = build_direct_code(UNIFORM8, CodeParams(n=20, rate=0.3, seed=5))
    wide_code = build_direct_code(UNIFORM8, CodeParams(n=40, rate=0.15, seed=5))
    for code in (packed_code, wide_code):
        m = 3
        links = code.codeword_links(m)
        hits = matching_messages(code, (1, 2), links[[1, 2]])
        assert m in hits.tolist()


def test_dump_codewords(tmp_path):
    code = build_direct_code(UNIFORM8, CodeParams(n=3, rate=1.0, seed=5))
    path = tmp_path / "codes.csv"
    dump_codewords(code, str(path))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "message,t0,t1,t2"
    assert len(lines) == code.message_count + 1
    row1 = [int(v) for v in lines[1].split(",")]
    assert row1[0] == 1 and row1[1:] == code.codeword(1).tolist()


def test_survey_restrictions_census_and_membership():
    code = build_direct_code(UNIFORM8, CodeParams(n=4, rate=2.0, seed=6))
    survey = survey_restrictions(code, (0,), (1, 2), xj_targets=np.array([0, 5]))
    assert survey.counts_j.sum() == code.message_count
    assert survey.j_space == 16 and survey.g_space == 256
    # every codeword's own (x_J, x_G) pair is a member
    restrict_j = indexing.restrict_codes((2, 2, 2), (0,))
    restrict_g = indexing.restrict_codes((2, 2, 2), (1, 2))
    full = code.codeword(3)
    pj = indexing.pack_sequences(restrict_j[full][None, :], 2)
    pg = indexing.pack_sequences(restrict_g[full][None, :], 4)
    assert pair_membership(survey, pj, pg).all()
    assert survey.match_xj.size == survey.match_g.size


def test_survey_restrictions_rejects_overlap():
    code = build_direct_code(UNIFORM8, CodeParams(n=4, rate=1.0, seed=6))
    with pytest.raises(ValueError):
        survey_restrictions(code, (0, 1), (1, 2))
