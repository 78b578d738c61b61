import math

import numpy as np
import pytest

from hdcow.channel import PhysicalParams
from hdcow.errors import ProtocolError
from hdcow.protocol import ProtocolParams
from hdcow.session import (
    SessionSettings,
    SimulatedChannel,
    Transcript,
    pipe_pair,
    run_bob,
    run_session,
    validate_transcript,
)
from hdcow.wire import (
    BlockAnnounce,
    DetectionReportMsg,
    PermutationReveal,
    SessionEnd,
    SessionStart,
    encode_message,
)


def noiseless_settings(d=4, n=16, blocks=1):
    return SessionSettings(
        protocol=ProtocolParams(d=d, n=n, tau=2e-9),
        physical=PhysicalParams.noiseless(),
        blocks=blocks,
    )


class TestNoiselessSession:
    def test_single_block_full_agreement(self):
        alice, bob, transcript = run_session(noiseless_settings(), seed=3)
        assert alice.sifted_count == 16
        assert bob.sifted_count == 16
        assert alice.sifted == bob.sifted
        assert alice.q_hat == 0.0
        assert bob.q_hat == 0.0
        assert validate_transcript(transcript) == []

    def test_multi_block_agreement(self):
        alice, bob, transcript = run_session(
            noiseless_settings(d=8, n=32, blocks=12), seed=9
        )
        assert alice.sifted == bob.sifted
        assert alice.sifted_count == 12 * 32
        assert validate_transcript(transcript) == []

    def test_transcripts_byte_identical_across_runs(self):
        _, _, t1 = run_session(noiseless_settings(d=4, n=8, blocks=5), seed=42)
        _, _, t2 = run_session(noiseless_settings(d=4, n=8, blocks=5), seed=42)
        assert t1.wire_bytes() == t2.wire_bytes()
        _, _, t3 = run_session(noiseless_settings(d=4, n=8, blocks=5), seed=43)
        assert t1.wire_bytes() != t3.wire_bytes()


class TestNoisySession:
    def test_mismatch_fraction_tracks_configured_qslot(self):
        proto = ProtocolParams(d=4, n=64, tau=2e-9)
        phys = PhysicalParams(
            mu=0.09, t_ch=1.0, xi=0.9, f_mon=0.0, t_dead=0.0, p_dc=0.0
        ).with_target_qslot(0.01, 4)
        settings = SessionSettings(protocol=proto, physical=phys, blocks=400)
        alice, bob, _ = run_session(settings, seed=5)
        mism = np.mean(np.array(alice.sifted) != np.array(bob.sifted))
        q_obs = mism / (proto.d - 1)
        sigma = math.sqrt(mism * (1 - mism) / alice.sifted_count) / (proto.d - 1)
        assert abs(q_obs - 0.01) < 3 * sigma
        assert abs(alice.q_hat - 0.01) < 3 * sigma

    def test_detected_rate_near_model(self):
        proto = ProtocolParams(d=8, n=256, tau=2e-9)
        phys = PhysicalParams(
            mu=0.1, xi=0.2, t_ch=0.5, f_mon=0.1, t_dead=4e-6, r_ext=0.0
        )
        settings = SessionSettings(protocol=proto, physical=phys, blocks=200)
        _, bob, _ = run_session(settings, seed=6)
        from hdcow.rates import detection_rate

        model = detection_rate(8, 0.1, phys.xi_eff, 4e-6, 2e-9)
        assert bob.detected_rate == pytest.approx(model, rel=0.05)


class ScriptedDuplex:
    """Feeds a canned byte stream to run_bob and swallows its output."""

    def __init__(self, frames):
        self._buffer = bytearray()
        for frame in frames:
            self._buffer.extend(frame)
        self.sent = bytearray()

    def send(self, data):
        self.sent.extend(data)

    def recv_exact(self, count):
        if len(self._buffer) < count:
            raise ProtocolError("script exhausted")
        out = bytes(self._buffer[:count])
        del self._buffer[:count]
        return out


class TestProtocolViolations:
    def test_reveal_before_announce_aborts(self):
        settings = noiseless_settings(d=2, n=2)
        channel = SimulatedChannel(settings.physical, seed=0)
        duplex = ScriptedDuplex(
            [
                encode_message(SessionStart(d=2, n=2, tau_picoseconds=2000)),
                encode_message(
                    PermutationReveal(block_id=0, indices=(1, 2, 3, 4))
                ),
            ]
        )
        with pytest.raises(ProtocolError, match="before"):
            run_bob(settings, channel, duplex)

    def test_dimension_mismatch_aborts(self):
        settings = noiseless_settings(d=4, n=16)
        channel = SimulatedChannel(settings.physical, seed=0)
        duplex = ScriptedDuplex(
            [encode_message(SessionStart(d=8, n=16, tau_picoseconds=2000))]
        )
        with pytest.raises(ProtocolError, match="dimension mismatch"):
            run_bob(settings, channel, duplex)

    def test_malformed_permutation_aborts(self):
        settings = noiseless_settings(d=2, n=2)
        channel = SimulatedChannel(settings.physical, seed=0)
        # announce, transmit, then reveal a non-bijection
        from hdcow.protocol import KeyBlock, Permutation, encode_block

        frame = encode_block(
            settings.protocol, KeyBlock([1, 2]), Permutation.identity(4), mu=50.0
        )
        channel.transmit(0, frame)
        duplex = ScriptedDuplex(
            [
                encode_message(SessionStart(d=2, n=2, tau_picoseconds=2000)),
                encode_message(BlockAnnounce(block_id=0)),
                encode_message(
                    PermutationReveal(block_id=0, indices=(1, 1, 3, 4))
                ),
            ]
        )
        with pytest.raises(ProtocolError, match="malformed permutation"):
            run_bob(settings, channel, duplex)

    def test_end_with_open_block_aborts(self):
        settings = noiseless_settings(d=2, n=2)
        channel = SimulatedChannel(settings.physical, seed=0)
        from hdcow.protocol import KeyBlock, Permutation, encode_block

        frame = encode_block(
            settings.protocol, KeyBlock([1, 2]), Permutation.identity(4), mu=50.0
        )
        channel.transmit(0, frame)
        duplex = ScriptedDuplex(
            [
                encode_message(SessionStart(d=2, n=2, tau_picoseconds=2000)),
                encode_message(BlockAnnounce(block_id=0)),
                encode_message(SessionEnd()),
            ]
        )
        with pytest.raises(ProtocolError, match="open block"):
            run_bob(settings, channel, duplex)


class TestTranscriptValidator:
    def test_flags_reveal_before_quantum(self):
        t = Transcript()
        t.record(Transcript.A_TO_B, SessionStart(d=2, n=2, tau_picoseconds=2000))
        t.record(Transcript.A_TO_B, BlockAnnounce(block_id=0))
        t.record(Transcript.A_TO_B, PermutationReveal(block_id=0, indices=(1, 2, 3, 4)))
        t.record(Transcript.QUANTUM, 0)
        t.record(Transcript.B_TO_A, DetectionReportMsg(block_id=0, entries=()))
        t.record(Transcript.A_TO_B, SessionEnd())
        violations = validate_transcript(t)
        assert any("before transmission" in v for v in violations)

    def test_flags_report_before_reveal(self):
        t = Transcript()
        t.record(Transcript.A_TO_B, SessionStart(d=2, n=2, tau_picoseconds=2000))
        t.record(Transcript.A_TO_B, BlockAnnounce(block_id=0))
        t.record(Transcript.QUANTUM, 0)
        t.record(Transcript.B_TO_A, DetectionReportMsg(block_id=0, entries=()))
        t.record(Transcript.A_TO_B, PermutationReveal(block_id=0, indices=(1, 2, 3, 4)))
        t.record(Transcript.A_TO_B, SessionEnd())
        violations = validate_transcript(t)
        assert any("precedes reveal" in v for v in violations)

    def test_accepts_recorded_real_session(self):
        _, _, transcript = run_session(noiseless_settings(blocks=3), seed=1)
        assert validate_transcript(transcript) == []
