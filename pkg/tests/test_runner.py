from secpmsim.config import Config
from secpmsim.runner import run_experiment
from secpmsim.stats import emit_report


def cfg_for(**kw):
    kw.setdefault("mode", "secpm")
    kw.setdefault("workload", "hashtable")
    kw.setdefault("txn_size", 256)
    kw.setdefault("txn_count", 30)
    return Config(**kw)


def test_single_core_run_accounts_every_txn():
    cfg = cfg_for()
    stats = run_experiment(cfg)
    assert stats.txn_count == cfg.txn_count
    assert len(stats.txn_latencies) == cfg.txn_count
    assert stats.nvm_writes_total > 0
    stats.check_accounting()


def test_multi_core_runs_all_streams():
    cfg = cfg_for(cores=4, txn_count=10)
    stats = run_experiment(cfg)
    assert stats.txn_count == 4 * 10
    stats.check_accounting()


def test_multi_core_is_deterministic():
    cfg = cfg_for(cores=2, txn_count=15)
    assert emit_report([run_experiment(cfg)]) == \
        emit_report([run_experiment(cfg)])


def test_more_cores_do_more_total_work():
    one = run_experiment(cfg_for(cores=1, txn_count=20))
    four = run_experiment(cfg_for(cores=4, txn_count=20))
    assert four.nvm_writes_total > one.nvm_writes_total


def test_zero_txn_run_is_empty_but_valid():
    stats = run_experiment(cfg_for(txn_count=0))
    assert stats.txn_count == 0
    assert stats.mean_txn_latency_ns == 0.0
