# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

import json
import tempfile
import unittest
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from src.common.config import config_digest, echo_config
from src.common.validation import ConfigurationError, config_from_dict
from src.harness import (
    COMMANDS,
    ArtifactLayout,
    CommandRecord,
    MissingArtifactError,
    cmd_replay,
    read_manifest,
    read_report,
    run_mc_campaign,
    scenario_seed,
    write_manifest,
    write_report,
)
from src.harness.campaigns import planner_rng
from src.harness.commands import load_array
from src.harness.reports import MC_COLUMNS, encode_csv
from src.sim import Branch
from src.sim.outcomes import read_outcomes
from test.utils import tiny_config


class TestReports(unittest.TestCase):
    def test_cells_are_formatted_exactly(self):
        payload = encode_csv(("a", "b", "c", "d"), [{"a": 0.1, "b": True, "c": None, "d": "east"}])
        self.assertEqual(payload, b"a,b,c,d\n0.1,1,,east\n")

    def test_missing_column(self):
        with self.assertRaises(ValueError):
            encode_csv(("a", "b"), [{"a": 1}])

    def test_write_and_read(self):
        rows = [{"scenario": "east", "simulations": 10, "failures": 1, "failure_rate": 0.1, "noise_variance": 0.0025, "noise_inflation": 1.0}]
        with tempfile.TemporaryDirectory() as tmp:
            path = write_report(Path(tmp) / "reports" / "mc.csv", MC_COLUMNS, rows)
            loaded = read_report(path)
        self.assertEqual(loaded[0]["failure_rate"], "0.1")
        self.assertEqual(list(loaded[0]), list(MC_COLUMNS))


class TestManifest(unittest.TestCase):
    def test_missing_artifact_names_its_producer(self):
        path = Path("/nonexistent/models/east/teacher.cfnn")
        record = CommandRecord("distill", Path("/nonexistent"), Path("/nonexistent"))
        with self.assertRaises(MissingArtifactError) as ctx:
            record.read(path, "train")
        self.assertIn("train", str(ctx.exception))
        self.assertIsInstance(ctx.exception, FileNotFoundError)
        self.assertEqual(ctx.exception.path, path)

    def test_manifest_hashes_relative_paths(self):
        config = tiny_config()
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            layout = ArtifactLayout(root)
            artifact = layout.report("mc")
            artifact.parent.mkdir(parents=True)
            artifact.write_bytes(b"x")
            timing = layout.report("timing")
            timing.write_bytes(b"t")
            record = CommandRecord("mc", root, root)
            record.wrote(artifact)
            record.wrote(timing, volatile=True)
            write_manifest(record, config)
            manifest = read_manifest(root, "mc")
        self.assertEqual(manifest["command"], "mc")
        self.assertEqual(manifest["seed"], 7)
        self.assertEqual(list(manifest["outputs"]), ["reports/mc.csv"])
        self.assertEqual(manifest["volatile_outputs"], ["reports/timing.csv"])
        self.assertEqual(manifest["config_sha256"], config_digest(config))
        self.assertEqual(config_from_dict(manifest["config"]).to_json(), config.to_json())

    def test_read_manifest_of_missing_command(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(MissingArtifactError):
                read_manifest(Path(tmp), "train")


class TestCampaigns(unittest.TestCase):
    def test_scenario_seeds(self):
        self.assertEqual(scenario_seed(7, Branch.EAST), scenario_seed(7, Branch.EAST))
        self.assertNotEqual(scenario_seed(7, Branch.EAST), scenario_seed(7, Branch.WEST))
        self.assertNotEqual(scenario_seed(7, Branch.EAST), scenario_seed(8, Branch.EAST))

    def test_planner_stream_differs_from_episode_stream(self):
        from src.sim.noise import rng_for

        self.assertNotEqual(planner_rng(3, 0).random(), rng_for(3, 0).random())

    def test_episodes_do_not_depend_on_campaign_length(self):
        config = tiny_config()
        short = run_mc_campaign(config, Branch.NORTH, 3)
        long = run_mc_campaign(config, Branch.NORTH, 6)
        for a, b in zip(short, long[:3], strict=True):
            np.testing.assert_array_equal(a.outcome.trajectory, b.outcome.trajectory)
            self.assertEqual(a.outcome.robustness, b.outcome.robustness)

    def test_noise_kept_only_for_failures(self):
        for episode in run_mc_campaign(tiny_config(), Branch.EAST, 20):
            self.assertEqual(episode.noise is not None, episode.outcome.collided)

    @pytest.mark.slow
    def test_worker_count_does_not_change_results(self):
        config = tiny_config()
        serial = run_mc_campaign(config, Branch.SOUTH, 8, workers=1)
        parallel = run_mc_campaign(config, Branch.SOUTH, 8, workers=2)
        for a, b in zip(serial, parallel, strict=True):
            np.testing.assert_array_equal(a.outcome.trajectory, b.outcome.trajectory)


class TestMcCommand(unittest.TestCase):
    def test_mc_outputs_and_replay(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = tiny_config(out=str(Path(tmp) / "run"))
            record = COMMANDS["mc"](config, None)
            layout = ArtifactLayout(Path(config.campaign.out))
            outcomes = read_outcomes(layout.mc_outcomes(Branch.EAST))
            failures = read_outcomes(layout.mc_failures(Branch.EAST))
            noise = load_array(layout.mc_failure_noise(Branch.EAST))
            report = read_report(layout.report("mc"))
            self.assertEqual(len(outcomes), 40)
            self.assertEqual(len(failures), sum(o.collided for o in outcomes))
            self.assertEqual(noise.shape, (len(failures), 92))
            self.assertEqual(report[0]["scenario"], "east")
            self.assertEqual(int(report[0]["failures"]), len(failures))
            self.assertIn(layout.report("mc"), record.outputs)
            resolved = json.loads((Path(config.campaign.out) / "config.resolved.json").read_text())
            self.assertEqual(resolved["campaign"]["seed"], 7)

            result = cmd_replay(config, "mc")
            self.assertTrue(result.identical)
            self.assertEqual(result.mismatched, [])
            self.assertIn("reports/mc.csv", result.matched)

    def test_replay_uses_the_recorded_configuration(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = tiny_config(out=str(Path(tmp) / "run"), mc_count=12)
            COMMANDS["mc"](config, None)
            reseeded = replace(config, campaign=replace(config.campaign, seed=8))
            echo_config(reseeded, config.campaign.out)

            result = cmd_replay(reseeded, "mc")
            self.assertTrue(result.identical, f"mismatched: {result.mismatched}")
            self.assertEqual(read_manifest(Path(config.campaign.out) / "replay", "mc")["seed"], 7)

    def test_replay_rejects_a_tampered_manifest(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = tiny_config(out=str(Path(tmp) / "run"), mc_count=4)
            COMMANDS["mc"](config, None)
            path = ArtifactLayout(Path(config.campaign.out)).manifest("mc")
            manifest = json.loads(path.read_text())
            manifest["config"]["campaign"]["seed"] = 8
            path.write_text(json.dumps(manifest))
            with self.assertRaises(ConfigurationError):
                cmd_replay(config, "mc")
            del manifest["config"]
            path.write_text(json.dumps(manifest))
            with self.assertRaises(ConfigurationError):
                cmd_replay(config, "mc")

    def test_downstream_command_without_inputs(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = tiny_config(out=str(Path(tmp) / "run"))
            with self.assertRaises(MissingArtifactError) as ctx:
                COMMANDS["distill"](config, None)
            self.assertEqual(ctx.exception.producer, "train")

    def test_replay_of_unknown_command(self):
        with self.assertRaises(ConfigurationError):
            cmd_replay(tiny_config(), "serve")


if __name__ == "__main__":
    unittest.main()
