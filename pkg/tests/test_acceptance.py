"""
Desk-scale learning check. Trains on a few hundred synthetic members, so it
only runs with MISR_RUN_SLOW=1 (in the environment or in .env).
"""
import os

import pytest
from dotenv import load_dotenv

from misr.assembly import SplitConfig, input_stack, split_dataset
from misr.metric import baseline_score, cpsnr
from misr.neuralnet import TrainConfig, forward, train
from misr.report import ScoreReport, ScoreRow
from misr.simgen import gen_dataset

load_dotenv()

pytestmark = pytest.mark.skipif(os.getenv("MISR_RUN_SLOW") != "1", reason="set MISR_RUN_SLOW=1 to run")


def test_network_beats_bicubic_on_held_out_members():
    ds = gen_dataset(seed=11, n_members=200, hr_size=144)
    ds_train, ds_test = split_dataset(ds, SplitConfig(seed=1, test_fraction=0.2))
    params, history = train(ds_train, TrainConfig(epochs=50, batch_size=2, seed=0))
    assert history[-1].train_loss < history[0].train_loss

    rows = [
        ScoreRow(
            m.member_id,
            m.band.value,
            baseline_score(m),
            cpsnr(m.hr, m.hr_mask, forward(params, input_stack(m))).cpsnr,
        )
        for m in ds_test.members
    ]
    overall = ScoreReport(rows).aggregates[-1]
    assert overall.avg_cpsnr_network >= overall.avg_cpsnr_bicubic + 0.3
    assert overall.n_network_wins >= 0.6 * overall.n_images
