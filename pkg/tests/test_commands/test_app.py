# tests/test_commands/test_app.py
# Tests for command registration, argument parsing and exit codes.

import argparse

import pytest

from core.app import run
from core.app_base import MosLab, int_list
from commands.bench import head_grid


class TestRegistration:
    """Test suite for command extension loading."""

    def test_all_commands_loaded(self):
        """Test that every command module registers itself."""
        app = MosLab()
        app.load_extensions()
        assert set(app.commands) == {"train", "eval", "rank", "spectrum", "kld", "bottleneck", "bench"}

    def test_commands_have_run(self):
        """Test that each command implements run."""
        app = MosLab()
        app.load_extensions()
        for command in app.commands.values():
            assert callable(command.run)
            assert command.help


class TestExitCodes:
    """Test suite for the process exit-code contract."""

    def test_no_arguments_is_usage_error(self, capsys):
        """Test that no arguments print usage and exit 2."""
        assert run([]) == 2
        assert "usage" in capsys.readouterr().err

    def test_unknown_flag_is_usage_error(self):
        """Test that an unknown flag exits 2."""
        assert run(["eval", "--bogus"]) == 2

    def test_unknown_command_is_usage_error(self):
        """Test that an unknown subcommand exits 2."""
        assert run(["plot"]) == 2

    def test_help_exits_zero(self):
        """Test that --help is not an error."""
        assert run(["--help"]) == 0

    def test_missing_checkpoint_is_runtime_error(self, tmp_path, ptb_dir, caplog):
        """Test that a missing file exits 1 and names the path."""
        assert run(["eval", "--ckpt", str(tmp_path / "none.ckpt"), "--corpus", str(ptb_dir)]) == 1
        assert "none.ckpt" in caplog.text

    def test_contract_violation_is_runtime_error(self, tmp_path):
        """Test that invalid library arguments exit 1."""
        out = tmp_path / "s.csv"
        argv = ["bottleneck", "--n", "4", "--m", "3", "--r", "9", "--d-grid", "2", "--k-grid", "1", "--out", str(out)]
        assert run(argv) == 1


class TestArgumentTypes:
    """Test suite for list-valued flags."""

    def test_int_list(self):
        """Test comma-separated integer grids."""
        assert int_list("4,8,24") == [4, 8, 24]
        with pytest.raises(argparse.ArgumentTypeError):
            int_list("4,x")
        with pytest.raises(argparse.ArgumentTypeError):
            int_list("0,2")

    def test_head_grid(self):
        """Test bench grid cells with and without a head kind."""
        assert head_grid("mos:5,moc:2,10") == [("mos", 5), ("moc", 2), ("mos", 10)]
        with pytest.raises(argparse.ArgumentTypeError):
            head_grid("rnn:3")
        with pytest.raises(argparse.ArgumentTypeError):
            head_grid("")
