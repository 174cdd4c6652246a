"""The shared blackboard: scoped configuration, versioned models, cloning.

Every pipe task in a flow communicates through one MetaModel. This walk
shows the three sections doing their jobs: the scoped key-value store,
the append-only log, and the versioned model space.
"""

from flowforge import Benchmark, ConfigStore, MetaModel, SyntheticBackend

backend = SyntheticBackend(Benchmark.builtin("jetdnn-synth"))

print("== configuration scoping ==")
cfg = ConfigStore(
    {
        "tolerate_acc_loss": 0.10,              # global default
        "Pruning::tolerate_acc_loss": 0.02,     # every pruning task
        "aggressive@tolerate_acc_loss": 0.08,   # one specific instance
    }
)
for instance in ("prune_1", "aggressive"):
    value = cfg.resolve(instance, "Pruning", "tolerate_acc_loss")
    print(f"  {instance:<12} resolves tolerate_acc_loss -> {value}")
print(f"  {'scale_1':<12} resolves tolerate_acc_loss -> "
      f"{cfg.resolve('scale_1', 'Scaling', 'tolerate_acc_loss')} (global fallback)")

print("\n== versioned model space ==")
mm = MetaModel(cfg)
net = backend.network()
v1 = mm.space.put("network", net, None, "generator")
v2 = mm.space.put("network", net.with_pruning(0.5), backend.evaluate(net.with_pruning(0.5)), "pruner")
print(f"  inserted versions {v1} and {v2}; both stages retrievable:")
for entry in mm.space.entries:
    rate = entry.payload.pruning_rate
    print(f"    v{entry.version} by {entry.producer}: pruning_rate={rate}")
print(f"  latest network = v{mm.space.latest('network').version}")

print("\n== execution log ==")
mm.log.append("generator", "started", "")
mm.log.append("generator", "finished", "network v1")
for record in mm.log.records:
    print(f"  {record.task:<10} {record.event:<9} {record.detail}")

print("\n== clone isolation (what FORK relies on) ==")
clone = mm.clone()
clone.cfg.set("Pruning::tolerate_acc_loss", 0.5)
clone.space.put("network", net.with_scale(0.5), None, "scaler")
print(f"  original entries: {len(mm.space.entries)}, clone entries: {len(clone.space.entries)}")
print(f"  original tolerance: {mm.cfg.get('Pruning::tolerate_acc_loss')}, "
      f"clone tolerance: {clone.cfg.get('Pruning::tolerate_acc_loss')}")

print("\n== serialization round trip ==")
restored = MetaModel.from_json(mm.to_json())
print(f"  lossless: {restored.to_json() == mm.to_json()}")
