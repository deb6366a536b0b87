import base64
import json
import socket

import numpy as np
import pytest

from salbridge.explain import EXPLAINERS
from salbridge.model import build_model
from salbridge.server import BridgeService, decode_tensor, encode_tensor, serve

SHAPE = (1, 16, 16)


@pytest.fixture()
def service():
    return BridgeService(build_model("tinycnn", SHAPE, num_classes=4, seed=0))


def call(service, cmd, **args):
    response = service.handle({"id": 1, "cmd": cmd, "args": args})
    assert response["ok"], response.get("error")
    return response["result"]


def probe_batch(n=4):
    return np.random.default_rng(0).random((n, *SHAPE)).astype(np.float32)


class TestProtocol:
    def test_tensor_round_trip_bit_exact(self):
        arr = np.random.default_rng(0).random((3, 5, 7)).astype("<f4")
        out = decode_tensor(encode_tensor(arr))
        assert out.tobytes() == arr.tobytes()

    def test_response_id_matches(self, service):
        response = service.handle({"id": 42, "cmd": "info", "args": {}})
        assert response["id"] == 42 and response["ok"]

    def test_unknown_command_error(self, service):
        response = service.handle({"id": 1, "cmd": "nope", "args": {}})
        assert not response["ok"] and "nope" in response["error"]

    def test_malformed_base64_error(self, service):
        response = service.handle({
            "id": 1, "cmd": "predict",
            "args": {"images": [{"shape": [1, 16, 16], "data": "!!!"}]},
        })
        assert not response["ok"]

    def test_tcp_round_trip(self, service):
        server, port = serve(service)
        try:
            with socket.create_connection(("127.0.0.1", port)) as sock:
                fh = sock.makefile("rwb")
                fh.write(json.dumps({"id": 7, "cmd": "info", "args": {}}).encode()
                         + b"\n")
                fh.flush()
                response = json.loads(fh.readline())
            assert response["id"] == 7 and response["ok"]
        finally:
            server.shutdown()

    def test_bad_json_line_gets_error_response(self, service):
        server, port = serve(service)
        try:
            with socket.create_connection(("127.0.0.1", port)) as sock:
                fh = sock.makefile("rwb")
                fh.write(b"{not json\n")
                fh.flush()
                response = json.loads(fh.readline())
            assert not response["ok"]
        finally:
            server.shutdown()


class TestInfo:
    def test_capabilities(self, service):
        info = call(service, "info")
        assert info["input_shape"] == list(SHAPE)
        assert info["num_classes"] == 4
        assert info["num_layers"] == 4
        assert set(info["explainers"]) == set(EXPLAINERS)

    def test_stable_across_calls(self, service):
        assert call(service, "info") == call(service, "info")

    def test_unknown_args_ignored(self, service):
        assert call(service, "info", future_field=1) == call(service, "info")


class TestPredict:
    def test_rows_sum_to_one(self, service):
        batch = probe_batch(3)
        result = call(service, "predict", images=[encode_tensor(x) for x in batch])
        probs = decode_tensor(result["probs"])
        assert probs.shape == (3, 4)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-5)

    def test_batch_matches_single_calls(self, service):
        batch = probe_batch(8)
        together = decode_tensor(
            call(service, "predict",
                 images=[encode_tensor(x) for x in batch])["probs"]
        )
        for i, x in enumerate(batch):
            alone = decode_tensor(
                call(service, "predict", images=[encode_tensor(x)])["probs"]
            )[0]
            np.testing.assert_allclose(together[i], alone, atol=1e-5)

    def test_shape_mismatch_names_expected(self, service):
        response = service.handle({
            "id": 1, "cmd": "predict",
            "args": {"images": [encode_tensor(np.zeros((1, 8, 8)))]},
        })
        assert not response["ok"] and "16" in response["error"]


class TestExplain:
    @pytest.mark.parametrize("method", sorted(EXPLAINERS))
    def test_map_dims_match_input(self, service, method):
        image = probe_batch(1)[0]
        result = call(service, "explain", method=method,
                      image=encode_tensor(image), target=0, seed=0)
        assert decode_tensor(result["map"]).shape == SHAPE[1:]

    @pytest.mark.parametrize("method", sorted(EXPLAINERS))
    def test_repeat_call_within_tolerance(self, service, method):
        image = probe_batch(1)[0]
        maps = [
            decode_tensor(call(service, "explain", method=method,
                               image=encode_tensor(image), target=1,
                               seed=3)["map"])
            for _ in range(2)
        ]
        np.testing.assert_allclose(maps[0], maps[1], atol=1e-6)

    def test_unknown_method_lists_available(self, service):
        response = service.handle({
            "id": 1, "cmd": "explain",
            "args": {"method": "shap", "image": encode_tensor(probe_batch(1)[0]),
                     "target": 0, "seed": 0},
        })
        assert not response["ok"] and "gradient" in response["error"]


class TestRandomize:
    def _probe(self, service):
        batch = probe_batch(4)
        return decode_tensor(
            call(service, "predict",
                 images=[encode_tensor(x) for x in batch])["probs"]
        )

    def test_k_zero_is_identity(self, service):
        before = self._probe(service)
        call(service, "randomize", k=0, seed=1)
        np.testing.assert_allclose(self._probe(service), before, atol=1e-6)

    def test_randomize_then_reset_restores(self, service):
        before = self._probe(service)
        call(service, "randomize", k=4, seed=1)
        disturbed = self._probe(service)
        assert np.abs(disturbed - before).max() > 1e-6
        call(service, "reset")
        np.testing.assert_allclose(self._probe(service), before, atol=1e-6)

    def test_same_seed_reproduces(self, service):
        call(service, "randomize", k=2, seed=9)
        first = self._probe(service)
        call(service, "reset")
        call(service, "randomize", k=2, seed=9)
        np.testing.assert_allclose(self._probe(service), first, atol=1e-6)

    def test_k_out_of_range(self, service):
        response = service.handle({"id": 1, "cmd": "randomize",
                                   "args": {"k": 5, "seed": 0}})
        assert not response["ok"]

    def test_deeper_randomization_diverges_more(self, service):
        before = self._probe(service)
        deltas = []
        for k in (1, 4):
            call(service, "randomize", k=k, seed=3)
            deltas.append(np.abs(self._probe(service) - before).mean())
            call(service, "reset")
        assert deltas[1] != deltas[0]
