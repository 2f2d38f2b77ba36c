import time
import numpy as np
from crisptree.envs import make_env
from crisptree.sac import SacTrainer, TrainerConfig
from crisptree.tree import TreePolicy

t0 = time.time()
for seed in (0, 1):
    env = make_env("pendulum")
    ev = make_env("pendulum")
    actor = TreePolicy(depth=2, m=4, action_dim=1, e=2, seed=seed,
                       action_low=env.spec.action_low, action_high=env.spec.action_high)
    cfg = TrainerConfig(actor_lr=5e-4, critic_lr=5e-4, batch_size=256, tau=0.01,
                        total_steps=150_000, warmup_steps=1000, seed=seed,
                        eval_interval=2500, eval_episodes=5, early_stop_return=950.0)
    tr = SacTrainer(env, actor, cfg, eval_env=ev)
    res = tr.train()
    final = tr.evaluate(10)
    print(f"seed {seed}: steps={res.steps} early={res.early_stopped} "
          f"eval10={final:.1f} wall={res.wallclock_s:.0f}s", flush=True)
print(f"total {time.time()-t0:.0f}s")
