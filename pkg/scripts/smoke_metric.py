# scripts/smoke_metric.py
from misr.metric import baseline_score, cpsnr, uncorrected_psnr
from misr.resample import bicubic_upscale_x3
from misr.simgen import bias_vs_cloud_pair, gen_member

SIZE = 48


def main():
    hr, mask, clouded, biased = bias_vs_cloud_pair(seed=3, size=SIZE)
    print("=== bias vs clouds ===")
    print(f"plain PSNR   clouded={uncorrected_psnr(hr, mask, clouded):.3f}  biased={uncorrected_psnr(hr, mask, biased):.3f}")
    print(f"cPSNR        clouded={cpsnr(hr, mask, clouded).cpsnr:.3f}  biased={cpsnr(hr, mask, biased).cpsnr:.3f}")

    member = gen_member(seed=3, hr_size=SIZE)
    first = bicubic_upscale_x3(member.lr_list[0].image, size=None)
    scored = cpsnr(member.hr, member.hr_mask, first)
    print(f"\n=== {member.member_id} ({len(member.lr_list)} LR) ===")
    print(f"first LR bicubic: {scored.cpsnr:.3f} dB at offset {scored.best_offset}, bias {scored.bias_at_best:+.4f}")
    print(f"baseline score:   {baseline_score(member):.3f} dB")


if __name__ == "__main__":
    main()
