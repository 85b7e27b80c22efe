#!/usr/bin/env python3
# Overfit the tiny network on one synthetic video (a few minutes on a laptop CPU).

import sys
import tempfile
from pathlib import Path

from decoupled_sgg.dataset import GeneratorConfig, generate_synthetic, write_corpus
from decoupled_sgg.metrics import recall_at_k
from decoupled_sgg.model import ModelConfig
from decoupled_sgg.training import FrameCache, RunConfig, predict_video, train

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 500
work = Path(tempfile.mkdtemp(prefix="dds_overfit_"))

# one 8-frame video of an agent and 1-3 shapes
gen = GeneratorConfig(num_videos=1, frames_per_video=8, image_size=32)
videos, frames = generate_synthetic(gen, seed=3)
corpus = write_corpus(work / "corpus", gen, 3, videos, frames)
video = videos[0]
for t, frame in enumerate(video.frames[:3]):
    print("frame", t, [(corpus.objects[x.object_label], [corpus.relations[r] for r in x.relations]) for x in frame.triplets])

model = ModelConfig(num_objects=corpus.num_objects, num_relations=corpus.num_relations, d=16, num_heads=2,
                    ffn_dim=32, enc_layers=1, obj_dec_layers=2, rel_dec_layers=1, num_queries=4,
                    image_size=(32, 32), backbone_channels=(16, 32))
cfg = RunConfig(model=model, lr=1e-3, backbone_lr=1e-3, steps=steps, videos_per_step=1,
                train_videos=[video.video_id])
result = train(cfg, corpus, None, work / "run", progress=True)
print("loss", result.losses[0]["total"], "->", result.losses[-1]["total"])

preds = predict_video(result.model, FrameCache(corpus)[video.video_id], corpus.subject_class, 100)
print("R@20 on the training video", recall_at_k(preds, video.frames, 20))
for p in preds[0][:5]:
    print(f"{p.score:.3f}", corpus.objects[p.subject_label], corpus.relations[p.relation_label],
          corpus.objects[p.object_label])
print("outputs in", work)
