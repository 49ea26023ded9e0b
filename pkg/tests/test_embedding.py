"""Trigram embedder, on-disk cache, exact k-NN index, and remote clients."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from greencast.clients import ChatClient, RemoteEmbedder
from greencast.embedding import (
    CachedEmbedder,
    EmbeddingCache,
    LocalTrigramEmbedder,
    VectorIndex,
)
from greencast.errors import ConfigError, InputError, RemoteBackendError


# ------------------------------------------------------- LocalTrigramEmbedder

def test_embedder_rows_are_unit_norm():
    e = LocalTrigramEmbedder(dim=256)
    vecs = e.embed_batch(["energia solar", "reciclaje de vidrio", "x"])
    norms = np.linalg.norm(vecs, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-12)


def test_embedder_is_deterministic_across_instances():
    a = LocalTrigramEmbedder(dim=512).embed_batch(["gestión de residuos"])
    b = LocalTrigramEmbedder(dim=512).embed_batch(["gestión de residuos"])
    assert np.array_equal(a, b)


def test_embedder_cleans_before_embedding():
    e = LocalTrigramEmbedder(dim=256)
    a, b = e.embed_batch(["Energia SOLAR!", "energia solar"])
    assert np.array_equal(a, b)


def test_embedder_similarity_orders_related_texts_first():
    e = LocalTrigramEmbedder(dim=1024)
    base, close, far = e.embed_batch(
        ["instalacion de paneles solares", "instalacion de panel solar", "contabilidad fiscal"]
    )
    assert base @ close > base @ far


def test_embedder_rejects_empty_text_and_bad_dim():
    e = LocalTrigramEmbedder(dim=64)
    with pytest.raises(InputError, match="empty text"):
        e.embed_batch(["valida", "   !!!   "])
    with pytest.raises(ConfigError):
        LocalTrigramEmbedder(dim=0)


def test_embedder_single_character_text_embeds():
    # padding guarantees at least one trigram even for one-letter skills
    vec = LocalTrigramEmbedder(dim=64).embed_batch(["x"])[0]
    assert np.isclose(np.linalg.norm(vec), 1.0)


# ------------------------------------------------------------- EmbeddingCache

def test_cache_round_trip_and_persistence(tmp_path):
    path = tmp_path / "cache.jsonl"
    cache = EmbeddingCache(path)
    key = EmbeddingCache.key_for("backend-a", "texto")
    vec = np.array([0.6, 0.8])
    cache.put(key, vec)
    assert np.array_equal(cache.get(key), vec)

    reloaded = EmbeddingCache(path)
    assert np.array_equal(reloaded.get(key), vec)
    assert len(reloaded) == 1


def test_cache_key_separates_backends():
    a = EmbeddingCache.key_for("backend-a", "texto")
    b = EmbeddingCache.key_for("backend-b", "texto")
    assert a != b


def test_cache_ignores_torn_final_line(tmp_path):
    path = tmp_path / "cache.jsonl"
    cache = EmbeddingCache(path)
    cache.put("k1", np.array([1.0, 0.0]))
    with path.open("a", encoding="utf-8") as fh:
        fh.write('{"key": "k2", "dim": 2, "values": [0.5')  # interrupted write
    reloaded = EmbeddingCache(path)
    assert len(reloaded) == 1
    assert reloaded.get("k2") is None


def test_cache_get_returns_a_copy(tmp_path):
    cache = EmbeddingCache(tmp_path / "c.jsonl")
    cache.put("k", np.array([1.0, 2.0]))
    cache.get("k")[0] = 99.0
    assert np.array_equal(cache.get("k"), [1.0, 2.0])


class _CountingEmbedder:
    backend_id = "counting"
    dim = 8

    def __init__(self):
        self.calls = []

    def embed_batch(self, texts):
        self.calls.append(list(texts))
        out = np.zeros((len(texts), self.dim))
        for i, t in enumerate(texts):
            out[i, len(t) % self.dim] = 1.0
        return out


def test_cached_embedder_only_misses_reach_backend(tmp_path):
    inner = _CountingEmbedder()
    cached = CachedEmbedder(inner, EmbeddingCache(tmp_path / "c.jsonl"))
    first = cached.embed_batch(["uno", "dos"])
    again = cached.embed_batch(["uno", "dos", "tres"])
    assert inner.calls == [["uno", "dos"], ["tres"]]
    assert np.array_equal(first, again[:2])


def test_cached_embedder_is_thread_safe(tmp_path):
    inner = _CountingEmbedder()
    cached = CachedEmbedder(inner, EmbeddingCache(tmp_path / "c.jsonl"))
    texts = [f"texto {i}" for i in range(20)]
    results = [None] * 8

    def work(slot):
        results[slot] = cached.embed_batch(texts)

    threads = [threading.Thread(target=work, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for r in results[1:]:
        assert np.array_equal(results[0], r)


# ---------------------------------------------------------------- VectorIndex

def _index_from(rows):
    return VectorIndex.build([(i + 1, np.asarray(v, dtype=float)) for i, v in enumerate(rows)])


def test_knn_returns_descending_scores():
    idx = _index_from([[1, 0], [0.8, 0.6], [0, 1]])
    hits = idx.knn(np.array([1.0, 0.0]), k=3)
    assert [eid for eid, _ in hits] == [1, 2, 3]
    scores = [s for _, s in hits]
    assert scores == sorted(scores, reverse=True)
    assert np.isclose(hits[0][1], 1.0)


def test_knn_tie_breaks_by_entry_id():
    idx = _index_from([[0, 1], [1, 0], [1, 0]])  # entries 2 and 3 tie exactly
    hits = idx.knn(np.array([1.0, 0.0]), k=2)
    assert [eid for eid, _ in hits] == [2, 3]


def test_knn_k_larger_than_index_returns_all():
    idx = _index_from([[1, 0], [0, 1]])
    assert len(idx.knn(np.array([1.0, 1.0]), k=10)) == 2


def test_knn_matches_brute_force_on_random_data():
    rng = np.random.RandomState(11)
    for _ in range(50):
        n, d = rng.randint(2, 30), rng.randint(2, 16)
        mat = rng.randn(n, d)
        idx = _index_from(mat)
        query = rng.randn(d)
        k = rng.randint(1, n + 1)
        hits = idx.knn(query, k)
        unit = mat / np.linalg.norm(mat, axis=1)[:, None]
        scores = unit @ (query / np.linalg.norm(query))
        expect = sorted(zip(range(1, n + 1), scores), key=lambda t: (-t[1], t[0]))[:k]
        assert [eid for eid, _ in hits] == [eid for eid, _ in expect]
        assert np.allclose([s for _, s in hits], [s for _, s in expect], atol=1e-12)


def test_index_input_validation():
    with pytest.raises(InputError, match="zero entries"):
        VectorIndex.build([])
    with pytest.raises(InputError, match="duplicate"):
        VectorIndex.build([(1, np.ones(2)), (1, np.ones(2))])
    with pytest.raises(InputError, match="zero-norm"):
        VectorIndex.build([(1, np.zeros(3))])
    idx = _index_from([[1, 0]])
    with pytest.raises(InputError, match="dim"):
        idx.knn(np.ones(5), k=1)
    with pytest.raises(InputError, match="zero-norm"):
        idx.knn(np.zeros(2), k=1)
    with pytest.raises(ConfigError):
        idx.knn(np.ones(2), k=0)


# ------------------------------------------------------------- remote clients

class _ScriptedHandler(BaseHTTPRequestHandler):
    """Serves queued (status, body) responses; records request payloads."""

    script: list[tuple[int, dict]] = []
    seen: list[dict] = []

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        payload = json.loads(self.rfile.read(length))
        type(self).seen.append(
            {"path": self.path, "auth": self.headers.get("Authorization"), "body": payload}
        )
        status, body = (
            type(self).script.pop(0) if type(self).script else (500, {"error": "script empty"})
        )
        data = json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):  # keep test output quiet
        pass


@pytest.fixture()
def scripted_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _ScriptedHandler)
    _ScriptedHandler.script = []
    _ScriptedHandler.seen = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}", _ScriptedHandler
    server.shutdown()


def _embed_body(vectors):
    return {"data": [{"embedding": list(v)} for v in vectors]}


def test_remote_embedder_posts_and_normalizes(scripted_server, monkeypatch):
    url, handler = scripted_server
    monkeypatch.setenv("EMBED_API_KEY", "sk-prueba")
    handler.script.append((200, _embed_body([[3.0, 4.0], [0.0, 2.0]])))
    client = RemoteEmbedder(url, model="modelo-e", dim=2)
    out = client.embed_batch(["uno", "dos"])
    assert np.allclose(out, [[0.6, 0.8], [0.0, 1.0]])
    req = handler.seen[0]
    assert req["auth"] == "Bearer sk-prueba"
    assert req["body"] == {"model": "modelo-e", "input": ["uno", "dos"]}


def test_remote_embedder_retries_transient_then_succeeds(scripted_server, monkeypatch):
    url, handler = scripted_server
    monkeypatch.setenv("EMBED_API_KEY", "k")
    handler.script += [(503, {}), (200, _embed_body([[1.0, 0.0]]))]
    client = RemoteEmbedder(url, model="m", dim=2, backoff=0.01)
    out = client.embed_batch(["uno"])
    assert out.shape == (1, 2)
    assert len(handler.seen) == 2


def test_remote_embedder_gives_up_after_max_retries(scripted_server, monkeypatch):
    url, handler = scripted_server
    monkeypatch.setenv("EMBED_API_KEY", "k")
    handler.script += [(503, {}), (503, {}), (503, {})]
    client = RemoteEmbedder(url, model="m", dim=2, max_retries=3, backoff=0.01)
    with pytest.raises(RemoteBackendError) as err:
        client.embed_batch(["uno"])
    assert err.value.attempts == 3
    assert err.value.exit_code == 3


def test_remote_embedder_non_retryable_status_fails_fast(scripted_server, monkeypatch):
    url, handler = scripted_server
    monkeypatch.setenv("EMBED_API_KEY", "k")
    handler.script.append((401, {"error": "bad key"}))
    client = RemoteEmbedder(url, model="m", dim=2, backoff=0.01)
    with pytest.raises(RemoteBackendError, match="401"):
        client.embed_batch(["uno"])
    assert len(handler.seen) == 1


def test_remote_embedder_validates_count_and_dim(scripted_server, monkeypatch):
    url, handler = scripted_server
    monkeypatch.setenv("EMBED_API_KEY", "k")
    handler.script.append((200, _embed_body([[1.0, 0.0]])))
    with pytest.raises(RemoteBackendError, match="expected 2 vectors"):
        RemoteEmbedder(url, model="m", dim=2, backoff=0.01).embed_batch(["a", "b"])
    handler.script.append((200, _embed_body([[1.0, 0.0, 0.0]])))
    with pytest.raises(RemoteBackendError, match="expected dim 2"):
        RemoteEmbedder(url, model="m", dim=2, backoff=0.01).embed_batch(["a"])


def test_remote_embedder_requires_credential(monkeypatch):
    monkeypatch.delenv("EMBED_API_KEY", raising=False)
    client = RemoteEmbedder("http://127.0.0.1:1", model="m", dim=2)
    with pytest.raises(ConfigError, match="EMBED_API_KEY"):
        client.embed_batch(["uno"])


def test_chat_client_returns_first_choice_content(scripted_server, monkeypatch):
    url, handler = scripted_server
    monkeypatch.setenv("CHAT_API_KEY", "ck")
    handler.script.append((200, {"choices": [{"message": {"content": "respuesta"}}]}))
    client = ChatClient(url, model="modelo-c")
    reply = client.complete([{"role": "user", "content": "hola"}])
    assert reply == "respuesta"
    body = handler.seen[0]["body"]
    assert body["model"] == "modelo-c"
    assert body["messages"] == [{"role": "user", "content": "hola"}]
    assert body["temperature"] == 0.0


def test_chat_client_malformed_reply_is_backend_error(scripted_server, monkeypatch):
    url, handler = scripted_server
    monkeypatch.setenv("CHAT_API_KEY", "ck")
    handler.script.append((200, {"choices": []}))
    with pytest.raises(RemoteBackendError, match="malformed"):
        ChatClient(url, model="m").complete([{"role": "user", "content": "hola"}])
