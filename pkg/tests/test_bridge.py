import json

import numpy as np
import pytest
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.testclient import TestClient

from conftest import SMALL_DIMS, TestClientChannel, make_features, make_toy
from onlinest.bridge import protocol as p
from onlinest.bridge.client import RemoteModel
from onlinest.bridge.session import BridgeSessionHost
from onlinest.config import EngineConfig, PolicyConfig
from onlinest.engine import StopReason, offline_greedy, online_decode
from onlinest.errors import (
    MalformedResponseError,
    ProtocolVersionError,
    RemoteModelError,
    SessionError,
    StateError,
)
from onlinest.harness.corpus import gen_synthetic
from onlinest.harness.sweep import SweepGrid, run_sweep
from onlinest.types import Vocabulary
from onlinest_server.app import create_app


@pytest.fixture
def remote(toy_model):
    client = TestClient(create_app(toy_model))
    model = RemoteModel(TestClientChannel(client))
    yield model
    model.close()


def test_health(toy_model):
    client = TestClient(create_app(toy_model))
    assert client.get("/healthz").json() == {"ok": True, "sessions": 0}


def test_handshake_exposes_model(remote, toy_model):
    assert remote.vocab == toy_model.vocab
    assert remote.input_dim == SMALL_DIMS.input_dim
    assert remote.concurrent_sessions is False


def test_scores_cross_the_wire_bit_exact(remote, toy_model):
    feats = make_features(23, seed=4)
    local_enc = toy_model.encode(feats)
    _, local_scores = toy_model.decode_step(local_enc, toy_model.init_decoder_state(), 0)

    remote.begin_utterance("u")
    enc = remote.encode(feats)
    assert enc.hidden is None and enc.length == local_enc.length
    _, scores = remote.decode_step(enc, remote.init_decoder_state(), 0)
    remote.rollback()
    remote.end_utterance()
    assert scores.dtype == np.float64
    assert np.array_equal(scores, local_scores)


@pytest.mark.parametrize("policy", [PolicyConfig(4, 4, 1), PolicyConfig(8, 2, 3), PolicyConfig(100, 10, 2)])
def test_online_decode_matches_in_process(remote, toy_model, policy):
    for seed in range(5):
        feats = make_features(30 + 7 * seed, seed=seed)
        cfg = EngineConfig(policy, 1.0)
        assert online_decode(remote, feats, cfg) == online_decode(toy_model, feats, cfg)


def test_offline_greedy_matches_in_process(remote, toy_model):
    feats = make_features(41, seed=8)
    assert offline_greedy(remote, feats, 1.0) == offline_greedy(toy_model, feats, 1.0)


def test_sweep_table_identical_over_bridge(tmp_path):
    corpus = gen_synthetic(tmp_path, seed=3, n_utts=4, len_range=(20, 40), dims=SMALL_DIMS, vocab=Vocabulary.for_chars("abcde"))
    local = make_toy(seed=corpus.weights.seed)
    grid = SweepGrid((8, 16), (4,), (1, 2))
    expected = run_sweep(local, corpus.manifest, grid)

    channel = TestClientChannel(TestClient(create_app(local)))
    actual = run_sweep(RemoteModel(channel), corpus.manifest, grid, workers=4)
    channel.close()
    assert actual.rows == expected.rows
    assert actual.traces == expected.traces


def test_vocabulary_mismatch_rejected(toy_model):
    channel = TestClientChannel(TestClient(create_app(toy_model)))
    with pytest.raises(ProtocolVersionError):
        RemoteModel(channel, vocab=Vocabulary.for_chars("xyz"))
    channel.close()


def _closing_app(model, after: int) -> FastAPI:
    """Serves the bridge but hangs up after a fixed number of replies."""
    app = FastAPI()

    @app.websocket("/ws/model")
    async def ws_model(ws: WebSocket):
        await ws.accept()
        host = BridgeSessionHost(model)
        try:
            for _ in range(after):
                await ws.send_text(host.handle_text(await ws.receive_text()))
            await ws.close()
        except WebSocketDisconnect:
            pass

    return app


def test_connection_loss_mid_utterance_keeps_partial_result(toy_model):
    # handshake, begin, read, then one decode before the hang-up
    channel = TestClientChannel(TestClient(_closing_app(toy_model, after=4)))
    remote = RemoteModel(channel)
    with pytest.raises(SessionError) as info:
        online_decode(remote, make_features(40, seed=1), EngineConfig(PolicyConfig(4, 4, 3), 1.0))
    assert info.value.partial.stop_reason == StopReason.INTERRUPTED
    assert info.value.partial.trace.steps == ()
    channel.close()


class _ScriptedChannel:
    """Replies with canned server messages."""

    def __init__(self, *replies):
        self.replies = list(replies)
        self.sent = []

    def send_text(self, text):
        self.sent.append(json.loads(text))

    def recv_text(self):
        return self.replies.pop(0)

    def close(self):
        pass


def _handshake_ok(vocab=None):
    vocab = vocab or Vocabulary.for_chars("ab")
    return p.HandshakeResponse(version=p.PROTOCOL_VERSION, session="s1", vocab=vocab.to_dict(), input_dim=2).model_dump_json()


def _error(code):
    return p.ErrorMessage(code=code, message="nope").model_dump_json()


class TestClientErrors:
    @pytest.mark.parametrize(
        "code,exc",
        [
            (p.VERSION_MISMATCH, ProtocolVersionError),
            (p.VOCAB_MISMATCH, ProtocolVersionError),
            (p.UNKNOWN_SESSION, SessionError),
            (p.BAD_REQUEST, MalformedResponseError),
        ],
    )
    def test_handshake_error_codes(self, code, exc):
        with pytest.raises(exc):
            RemoteModel(_ScriptedChannel(_error(code)))

    def test_model_errors_keep_their_code(self):
        model = RemoteModel(_ScriptedChannel(_handshake_ok(), _error(p.STATE_ERROR)))
        with pytest.raises(RemoteModelError) as info:
            model.commit(3)
        assert info.value.code == p.STATE_ERROR

    def test_garbage_and_unexpected_replies(self):
        with pytest.raises(MalformedResponseError):
            RemoteModel(_ScriptedChannel("not json"))
        with pytest.raises(MalformedResponseError):
            RemoteModel(_ScriptedChannel(p.Ack().model_dump_json()))

    def test_wrong_score_count(self):
        bad = p.DecodeResponse(token=0, score=0.0, scores=p.encode_array(np.zeros(2), p.SCORE_DTYPE), size=2)
        ack = p.Ack().model_dump_json()
        read = p.ReadResponse(frames=3, encoder_len=1).model_dump_json()
        model = RemoteModel(_ScriptedChannel(_handshake_ok(), ack, read, bad.model_dump_json()))
        model.begin_utterance()
        enc = model.encode(make_features(3, dim=2))
        with pytest.raises(MalformedResponseError):
            model.decode_step(enc, model.init_decoder_state(), 0)

    def test_only_frame_delta_is_sent(self):
        ack = p.Ack().model_dump_json()
        channel = _ScriptedChannel(
            _handshake_ok(),
            ack,
            p.ReadResponse(frames=3, encoder_len=1).model_dump_json(),
            p.ReadResponse(frames=5, encoder_len=2).model_dump_json(),
        )
        model = RemoteModel(channel)
        model.begin_utterance("u1")
        feats = make_features(5, dim=2)
        model.encode(feats.prefix(3))
        model.encode(feats)
        reads = [m for m in channel.sent if m["type"] == "read"]
        assert [m["n"] for m in reads] == [3, 2]
        delta = p.decode_array(reads[1]["frames"], p.FRAME_DTYPE, (2, 2))
        assert np.array_equal(delta, feats.frames[3:])
        with pytest.raises(StateError):
            model.encode(feats.prefix(4))


class TestSessionHost:
    def _host(self, model=None):
        host = BridgeSessionHost(model or make_toy())
        reply = host.handle(p.HandshakeRequest(version=p.PROTOCOL_VERSION))
        return host, reply.session

    def _read(self, host, session, frames):
        return host.handle(
            p.ReadRequest(session=session, frames=p.encode_array(frames, p.FRAME_DTYPE), n=frames.shape[0], dim=frames.shape[1])
        )

    def test_version_mismatch(self):
        reply = BridgeSessionHost(make_toy()).handle(p.HandshakeRequest(version=p.PROTOCOL_VERSION + 1))
        assert reply.code == p.VERSION_MISMATCH

    def test_bad_json_and_unknown_type(self):
        host, _ = self._host()
        assert json.loads(host.handle_text("{oops"))["code"] == p.BAD_REQUEST
        assert json.loads(host.handle_text('{"type": "fly", "session": "x"}'))["code"] == p.BAD_REQUEST

    def test_requests_need_the_session(self):
        host = BridgeSessionHost(make_toy())
        assert host.handle(p.BeginRequest(session="x")).code == p.UNKNOWN_SESSION
        host, session = self._host()
        assert host.handle(p.BeginRequest(session="other")).code == p.UNKNOWN_SESSION

    def test_out_of_order_requests(self):
        host, s = self._host()
        assert host.handle(p.DecodeRequest(session=s, prev_token=0)).code == p.STATE_ERROR
        assert isinstance(host.handle(p.BeginRequest(session=s)), p.Ack)
        assert host.handle(p.BeginRequest(session=s)).code == p.STATE_ERROR
        assert host.handle(p.DecodeRequest(session=s, prev_token=0)).code == p.STATE_ERROR
        assert host.handle(p.CommitRequest(session=s, n=1)).code == p.STATE_ERROR

    def test_read_checks_dimension_and_payload(self):
        host, s = self._host()
        host.handle(p.BeginRequest(session=s))
        assert self._read(host, s, np.zeros((2, 3), dtype=np.float32)).code == p.CONFIGURATION_ERROR
        bad = p.ReadRequest(session=s, frames="AAAA", n=5, dim=SMALL_DIMS.input_dim)
        assert host.handle(bad).code == p.BAD_REQUEST
        reply = self._read(host, s, make_features(6).frames)
        assert (reply.frames, reply.encoder_len) == (6, 2)

    def test_commit_and_rollback_track_decoder_states(self):
        model = make_toy()
        feats = make_features(12, seed=3)
        enc = model.encode(feats)
        z1, first = model.decode_step(enc, model.init_decoder_state(), 0)
        y1 = int(np.argmax(first))
        _, second = model.decode_step(enc, z1, y1)

        host, s = self._host(model)
        host.handle(p.BeginRequest(session=s))
        self._read(host, s, feats.frames)
        a = host.handle(p.DecodeRequest(session=s, prev_token=0))
        host.handle(p.DecodeRequest(session=s, prev_token=a.token))
        host.handle(p.RollbackRequest(session=s))
        # rollback returns to z_0
        again = host.handle(p.DecodeRequest(session=s, prev_token=0))
        assert np.array_equal(p.decode_array(again.scores, p.SCORE_DTYPE, (again.size,)), first)
        assert isinstance(host.handle(p.CommitRequest(session=s, n=1)), p.Ack)
        nxt = host.handle(p.DecodeRequest(session=s, prev_token=y1))
        assert np.array_equal(p.decode_array(nxt.scores, p.SCORE_DTYPE, (nxt.size,)), second)
        assert host.utterance.last_committed_token == y1

    def test_end_closes_utterance(self):
        host, s = self._host()
        host.handle(p.BeginRequest(session=s))
        assert isinstance(host.handle(p.EndRequest(session=s)), p.Ack)
        assert host.utterance is None
        assert host.handle(p.EndRequest(session=s)).code == p.STATE_ERROR
