import numpy as np
import pytest

from exasurf.contour import extract_contour
from exasurf.exa import (ExaError, exa_decode, exa_encode, exa_read, exa_write)
from exasurf.phantom import PhantomSpec, generate_phantom
from exasurf.volume import Volume3D


def smoothed_volume(n, seed, passes=2):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((n, n, n)).astype(np.float32)
    for _ in range(passes):
        for ax in range(3):
            lo = np.take(f, np.maximum(np.arange(n) - 1, 0), axis=ax)
            hi = np.take(f, np.minimum(np.arange(n) + 1, n - 1), axis=ax)
            f = (lo + 2 * f + hi) / 4
    return Volume3D(f)


@pytest.mark.parametrize("seed", range(5))
def test_roundtrip_random_smoothed(seed):
    vol = smoothed_volume(32, seed)
    cont = extract_contour(vol, 0.0, precision=8)
    back = exa_decode(exa_encode(vol, 0.0, precision=8))
    assert back.same_structure(cont)


def test_roundtrip_nonpow2_dims():
    vol = smoothed_volume(40, 99)
    vol = Volume3D(np.ascontiguousarray(vol.values[:37, :22, :40]))
    cont = extract_contour(vol, 0.0, precision=6)
    back = exa_decode(exa_encode(vol, 0.0, precision=6))
    assert back.same_structure(cont)


def test_empty_contour_is_tiny():
    vol = Volume3D(np.zeros((16, 16, 16), dtype=np.float32))
    c = exa_encode(vol, 0.5, precision=8)
    assert len(c.sections["TOPO"]) <= 8
    assert c.sections["PREC"] == b""
    back = exa_decode(c)
    assert back.n_active_edges == 0


def test_workers_do_not_change_bytes():
    vol = smoothed_volume(24, 5)
    a = exa_encode(vol, 0.0, precision=8, workers=1)
    b = exa_encode(vol, 0.0, precision=8, workers=8)
    assert a.sections == b.sections


def test_precision_validation():
    vol = smoothed_volume(8, 0)
    with pytest.raises(ExaError):
        exa_encode(vol, 0.0, precision=0)
    with pytest.raises(ExaError):
        exa_encode(vol, 0.0, precision=17)


def test_file_roundtrip(tmp_path):
    vol = smoothed_volume(24, 8)
    cont = exa_encode(vol, 0.0, precision=4)
    cont.sections["FEAT"] = b"\x01\x02\x03"
    exa_write(tmp_path / "a.exa", cont)
    back = exa_read(tmp_path / "a.exa")
    assert back.dims == cont.dims
    assert back.precision == cont.precision
    assert back.table_hash == cont.table_hash
    assert back.sections == cont.sections
    assert back.tau == pytest.approx(cont.tau)
    # write -> read -> write is byte-stable
    exa_write(tmp_path / "b.exa", back)
    assert (tmp_path / "a.exa").read_bytes() == (tmp_path / "b.exa").read_bytes()


def test_bad_magic(tmp_path):
    (tmp_path / "x.exa").write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ExaError, match="magic"):
        exa_read(tmp_path / "x.exa")


def test_table_hash_mismatch():
    vol = smoothed_volume(16, 2)
    cont = exa_encode(vol, 0.0)
    cont.table_hash = b"\x00" * 16
    with pytest.raises(ExaError, match="version mismatch"):
        exa_decode(cont)


def test_truncated_stream_raises():
    vol = smoothed_volume(24, 3)
    cont = exa_encode(vol, 0.0)
    cont.sections["TOPO"] = cont.sections["TOPO"][: len(cont.sections["TOPO"]) // 3]
    with pytest.raises(Exception):
        exa_decode(cont)


def test_section_independence():
    vol = smoothed_volume(24, 4)
    cont = exa_encode(vol, 0.0, precision=8)
    plain = exa_decode(cont)
    cont.sections["DPOS"] = b"\xff" * 100
    cont.sections["FEAT"] = b"\xaa" * 64
    again = exa_decode(cont)
    assert again.same_structure(plain)


def test_offsets_survive_roundtrip_exactly():
    vol = smoothed_volume(28, 6)
    cont = extract_contour(vol, 0.0, precision=4)
    back = exa_decode(exa_encode(vol, 0.0, precision=4))
    assert np.array_equal(back.edge_q, cont.edge_q)
    assert np.array_equal(back.face_bits, cont.face_bits)


def test_sphere_rate_smoke():
    # the acceptance suite checks 128..512; keep a fast sanity bound here
    vol = generate_phantom(PhantomSpec("sphere", (64, 64, 64)))
    tau = 0.9 * 63 / 2
    cont = exa_encode(vol, tau, precision=8)
    decoded = exa_decode(cont)
    rate = cont.section_bits("TOPO") / (decoded.n_active_edges + 2)
    assert rate < 1.1
