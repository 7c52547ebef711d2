import json
import math
import os
import shutil
import socket
import subprocess
import time
import urllib.request

import numpy as np
import pytest

import gmmsum


def blobs(per_cluster=60, seed=0):
    rng = np.random.default_rng(seed)
    rows, labels = [], []
    for c, center in enumerate([(0, 0, 0), (10, 0, 0), (0, 10, 5)]):
        pos = rng.normal(center, 1.0, size=(per_cluster, 3))
        temp = rng.normal(c * 2.0, 0.5, size=(per_cluster, 1))
        age = rng.exponential(1.0, size=(per_cluster, 1))
        rows.append(np.hstack([pos, temp, age]))
        labels += [c] * per_cluster
    attrs = [("pos", "position"), ("temp", "scalar"), ("age", "scalar")]
    return gmmsum.Dataset(attrs, np.vstack(rows)), np.array(labels)


@pytest.fixture(scope="module")
def built():
    data, labels = blobs()
    cfg = gmmsum.FitConfig()
    cfg.max_components = 2
    return data, labels, gmmsum.build_summary(data, labels, cfg)


def test_dataset_round_trip(tmp_path):
    data, labels = blobs(10)
    assert data.size == 30
    assert data.dimension_count == 5
    assert data.dimension_name(1) == "pos.y"
    gmmsum.save_dataset(data, tmp_path / "d.json")
    back = gmmsum.load_dataset(tmp_path / "d.json")
    # columns are stored as float32
    np.testing.assert_array_equal(back.to_array(), data.to_array().astype(np.float32).astype(np.float64))
    gmmsum.save_dataset(back, tmp_path / "e.json")
    assert gmmsum.load_dataset(tmp_path / "e.json") == back
    gmmsum.save_labels(labels, tmp_path / "l.u32")
    np.testing.assert_array_equal(gmmsum.load_labels(tmp_path / "l.u32", back), labels)


def test_summary_contents_and_serialization(built, tmp_path):
    _, _, s = built
    assert s.cluster_count == 3
    assert s.cluster_sizes == [60, 60, 60]
    assert "0|1|2" in s.keys(0)
    g = s.gmm(0, "3")
    assert math.isclose(g["weights"].sum(), 1.0)
    assert g["covariances"].shape[1:] == (1, 1)
    assert s.wasserstein().shape == (3, 5)
    assert s.stats()["text"].startswith("GMM comp. ")
    assert gmmsum.Summary.deserialize(s.serialize()) == s
    s.save(tmp_path / "s.gmms")
    assert gmmsum.load_summary(tmp_path / "s.gmms") == s


def test_density_and_doi(built):
    _, _, s = built
    lo, hi = gmmsum.default_extent(s, 3)
    d1 = gmmsum.density_1d(s, 3, bins=400, extent=(lo - 5, hi + 5))
    assert abs(d1.sum() * (hi - lo + 10) / 400 - 1.0) < 1e-2
    doi = gmmsum.brush_doi(s, 3, -100.0, 100.0)
    np.testing.assert_allclose(doi, 1.0)
    half = gmmsum.brush_doi(s, 3, -100.0, 1.0)
    assert half[0] > 0.9 and half[2] < 0.1
    both = gmmsum.combine_doi([doi, half], "and")
    np.testing.assert_array_equal(both, np.minimum(doi, half))
    d2 = gmmsum.density_2d(s, 0, 3, width=30, height=20, doi=half)
    assert d2.shape == (20, 30)
    assert gmmsum.pcp(s, [0, 3, 4], width=10, height=8).shape == (8, 20)
    rows = gmmsum.time_histogram([s, s], 3, 50, (lo - 5, hi + 5))
    np.testing.assert_allclose(rows.sum(axis=1), 1.0, atol=0.02)


def test_fit_em_and_ray_integral():
    rng = np.random.default_rng(1)
    pts = np.concatenate([rng.normal(-5, 1, 500), rng.normal(5, 1, 500)])[:, None]
    r = gmmsum.fit_em(pts, 2)
    assert sorted(np.round(r["means"][:, 0])) == [-5.0, 5.0]
    trace = r["log_likelihood_trace"]
    assert all(b - a >= -1e-9 for a, b in zip(trace, trace[1:]))
    eye = np.eye(3)
    assert math.isclose(gmmsum.ray_integral([0, 0, 0], eye, (0, 0, 0), (0, 0, 1)), 1 / (2 * math.pi), rel_tol=1e-12)
    assert math.isclose(gmmsum.ray_integral([0, 0, 0], eye, (0, 0, 0), (0, 0, 1), 0.0), 1 / (4 * math.pi),
                        rel_tol=1e-12)
    assert math.isclose(gmmsum.tone_map(0.5, 2.0), 1 - math.exp(-1.0))


def test_transfer_matrix():
    rng = np.random.default_rng(2)
    a = rng.integers(0, 4, 500)
    b = rng.integers(0, 6, 500)
    m = gmmsum.transfer_matrix(a, b)
    assert m.shape == (6, 4)
    np.testing.assert_allclose(m.row_sums(), 1.0, atol=1e-12)
    np.testing.assert_allclose(m.advance(np.ones(4)), 1.0, atol=1e-12)


def test_render_is_deterministic(built):
    _, _, s = built
    img = gmmsum.render(s, 64, 48, gamma=2.0)
    assert img.shape == (48, 64, 4)
    assert img.dtype == np.uint8
    assert img[..., :3].min() < 255
    np.testing.assert_array_equal(img, gmmsum.render(s, 64, 48, gamma=2.0))
    cam = json.dumps({"eye": [5, 5, 60], "look_at": [5, 5, 2]})
    assert not np.array_equal(img, gmmsum.render(s, 64, 48, camera=cam, gamma=2.0))


def test_errors_map_to_python_exceptions(built, tmp_path):
    _, _, s = built
    with pytest.raises(KeyError):
        gmmsum.density_1d(s, 42)
    with pytest.raises(ValueError):
        gmmsum.brush_doi(s, 3, 2.0, 1.0)
    (tmp_path / "bad.gmms").write_bytes(b"junk")
    with pytest.raises(gmmsum.GmmsumError):
        gmmsum.load_summary(tmp_path / "bad.gmms")


def test_service_in_process(built):
    _, _, s = built
    svc = gmmsum.Service(s)
    status, ctype, body = svc.handle("GET", "/api/summary")
    assert status == 200 and ctype == "application/json"
    assert json.loads(body)["cluster_count"] == 3
    status, _, body = svc.handle("POST", "/api/brush", body=json.dumps({"dim": 3, "a": -100, "b": 1}))
    assert status == 200
    doi = json.loads(body)["doi"]
    np.testing.assert_allclose(doi, gmmsum.brush_doi(s, 3, -100, 1), rtol=0, atol=0)
    status, _, body = svc.handle("GET", "/api/density2d", {"dims": "0,3", "w": "30", "h": "20"})
    values = np.array(json.loads(body)["values"]).reshape(20, 30)
    np.testing.assert_array_equal(values, gmmsum.density_2d(s, 0, 3, 30, 20, doi=np.array(doi)))
    assert svc.handle("GET", "/api/nowhere")[0] == 404
    assert svc.handle("POST", "/api/timestep", body='{"t": 1}')[0] == 409
    status, ctype, body = svc.handle("GET", "/api/frame", {"w": "16", "h": "12"})
    assert status == 200 and ctype == "image/png" and body[1:4] == b"PNG"


def free_port():
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def cli_path():
    return os.environ.get("GMMSUM_CLI") or shutil.which("gmmsum")


@pytest.mark.skipif(cli_path() is None, reason="gmmsum executable not available")
def test_cli_serves_http(built, tmp_path):
    _, _, s = built
    s.save(tmp_path / "s.gmms")
    port = free_port()
    proc = subprocess.Popen([cli_path(), "serve", str(tmp_path / "s.gmms"), "--port", str(port)],
                            stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
    try:
        url = f"http://127.0.0.1:{port}"
        for _ in range(100):
            try:
                with urllib.request.urlopen(url + "/api/summary", timeout=1) as r:
                    manifest = json.loads(r.read())
                    assert r.headers["Access-Control-Allow-Origin"] == "*"
                break
            except OSError:
                time.sleep(0.05)
        else:
            pytest.fail("server did not start")
        assert manifest["cluster_count"] == 3
        req = urllib.request.Request(url + "/api/brush", data=b'{"dim": 3, "a": -100, "b": 100}', method="POST")
        with urllib.request.urlopen(req, timeout=5) as r:
            assert abs(json.loads(r.read())["mean_doi"] - 1.0) < 1e-9
        with urllib.request.urlopen(url + "/api/frame?w=20&h=10&format=ppm", timeout=5) as r:
            assert r.read().startswith(b"P6\n20 10\n255\n")
        with pytest.raises(urllib.error.HTTPError) as err:
            urllib.request.urlopen(url + "/api/density1d?dim=99", timeout=5)
        assert err.value.code == 404
    finally:
        proc.terminate()
        proc.wait(timeout=10)
