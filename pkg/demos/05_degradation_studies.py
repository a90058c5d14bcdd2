"""How reconstruction quality degrades with IRF width and detection noise.

Runs two reduced-size sweeps (shorter training, smaller grids than the
command-line defaults) and prints the SSIM trend for each. Takes a few
minutes.

Run:  python demos/05_degradation_studies.py
"""

from dataclasses import replace

from tdi import mlp, pipeline

recipe = replace(pipeline.desk_recipe(seed=2), n_silhouettes=3)  # 1200 pairs
config = mlp.TrainConfig(epochs=25, batch_size=64, seed=0)
print(f"simulating {recipe.n_scenes} scenes once; each sweep point below "
      f"re-finalizes and retrains from the same raw histograms")
raw = pipeline.simulate_raw(recipe)

print("\ntiming blur (retrained per point):")
for point in pipeline.sweep_irf(raw, config, n_test=120,
                                dts=(2.3e-12, 250e-12, 1000e-12)):
    print(f"  IRF {point.label:>7}: mean SSIM {point.mean_ssim:.3f}")

print("\ndetection noise (fixed training, noisy test inputs):")
for point in pipeline.sweep_noise(raw, config, n_test=120):
    print(f"  {point.label}: mean SSIM {point.mean_ssim:.3f}")

print("\nthe same protocols at full desk scale:")
print("  tdi sweep --kind irf   --preset desk --out runs/sweep_irf")
print("  tdi sweep --kind noise --preset desk --out runs/sweep_noise")
