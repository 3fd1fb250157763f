"""
3D LoRA 微調引擎命令列介面

結束碼: 0 成功、1 執行期失敗、2 用法 / 設定錯誤
"""

import functools
import logging
import math
import os
import time
from pathlib import Path
from typing import Any, Callable, Optional, Sequence, Tuple, TypeVar, cast

import click
from dotenv import load_dotenv
from rich.console import Console
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from ..config import ExperimentConfig, config_hash, load_config
from ..data.manifest import Manifest
from ..data.repository import VolumeRepository
from ..data.synthetic import MANIFEST_NAME, synth_generate
from ..errors import CheckpointLoadError, ConfigurationError, FormatError, Lora3DError
from ..metrics.classification import accuracy, auc, confusion, export_roc_csv, roc_curve
from ..models.accounting import (
    REFERENCE_FULL_FINETUNE_M, REFERENCE_LORA_TOTAL_M, REFERENCE_TFLOPS,
    flops_estimate, full_finetune_param_count, param_count_from_config,
)
from ..models.architecture import BackboneConfig, BackbonePreset
from ..models.classifier import HEAD_HIDDEN_UNITS, merge_adapters
from ..training.checkpoint import load_checkpoint, save_checkpoint
from ..training.crossval import (
    CrossValResult, checkpoint_config, restore_model, run_crossval, write_fold_artifacts,
)
from ..training.trainer import SelectionMetric, evaluate_scores, snapshot
from .schemas import EvalReport, FoldRow, MeanRow, RunReport

console = Console()
LOG_LEVEL_ENV = "LORA3D_LOG_LEVEL"
PRESETS = [p.value for p in BackbonePreset]

F = TypeVar("F", bound=Callable[..., Any])


class UsageFailure(click.ClickException):
    """用法或設定錯誤 (結束碼 2)"""
    exit_code = 2


def setup_logging(verbose: bool = False) -> logging.Logger:
    """設置日誌記錄；等級來自 --verbose 或環境變數 LORA3D_LOG_LEVEL"""
    load_dotenv()
    level = logging.DEBUG if verbose else getattr(logging, os.getenv(LOG_LEVEL_ENV, "INFO").upper(), logging.INFO)
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    return logging.getLogger(__name__)


def handle_errors(func: F) -> F:
    """將領域錯誤轉成 click 例外與對應的結束碼"""
    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except click.ClickException:
            raise
        except (ConfigurationError, FormatError, CheckpointLoadError) as e:
            console.print(f"[red]✗ {e}[/red]")
            raise UsageFailure(str(e))
        except (Lora3DError, OSError) as e:
            console.print(f"[red]✗ 執行失敗: {e}[/red]")
            logging.getLogger(__name__).debug("詳細錯誤信息", exc_info=True)
            raise click.ClickException(str(e))
    return cast(F, wrapper)


class ExtentsType(click.ParamType):
    """'D,H,W' 或單一整數 (立方體)"""
    name = "extents"

    def convert(self, value: Any, param: Optional[click.Parameter], ctx: Optional[click.Context]) -> Tuple[int, int, int]:
        if isinstance(value, tuple):
            return value
        try:
            parts = [int(p) for p in str(value).split(",")]
        except ValueError:
            self.fail(f"不是整數清單: {value}", param, ctx)
        if len(parts) == 1:
            parts = parts * 3
        if len(parts) != 3 or any(p < 1 for p in parts):
            self.fail(f"需要 3 個正整數: {value}", param, ctx)
        return (parts[0], parts[1], parts[2])


EXTENTS = ExtentsType()


def _fmt(value: float) -> str:
    return "nan" if math.isnan(value) else f"{value:.4f}"


@click.group()
@click.option('--verbose', '-v', is_flag=True, help='啟用詳細輸出')
@click.pass_context
def cli(ctx: click.Context, verbose: bool) -> None:
    """3D LoRA 微調引擎

    凍結 3D ResNet backbone + LoRA adapter + MLP head 的 ADHD 二元分類
    """
    ctx.ensure_object(dict)
    ctx.obj['verbose'] = verbose
    ctx.obj['logger'] = setup_logging(verbose)


# --- crossval ---

def build_report(result: CrossValResult, cfg: ExperimentConfig, wall_clock: float) -> RunReport:
    folds = []
    for fold in result.folds:
        acc = fold.metrics(SelectionMetric.ACCURACY)
        best_auc = fold.metrics(SelectionMetric.AUC)
        folds.append(FoldRow(
            fold=fold.fold,
            n_train=len(result.split.train_ids(fold.fold)),
            n_val=len(fold.val_ids),
            best_acc_epoch=acc["epoch"], best_acc_accuracy=acc["accuracy"], best_acc_auc=acc["auc"],
            best_auc_epoch=best_auc["epoch"], best_auc_accuracy=best_auc["accuracy"], best_auc_auc=best_auc["auc"],
        ))
    means = [MeanRow(variant=s.value, **result.mean(s)) for s in SelectionMetric]
    params = param_count_from_config(cfg.model.backbone(), cfg.rank, cfg.lora.exclude, cfg.model.hidden_units)
    return RunReport(
        config=cfg.to_dict(),
        config_hash=config_hash(cfg),
        trainable_params=params.total,
        backbone_digest=result.backbone_digest,
        folds=folds,
        means=means,
        wall_clock_seconds=wall_clock,
    )


@cli.command()
@click.option('--config', 'config_path', required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path), help='實驗設定 JSON')
@click.option('--manifest', 'manifest_path', required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path), help='manifest CSV')
@click.option('--out', 'out_dir', required=True, type=click.Path(file_okay=False, path_type=Path), help='輸出目錄')
@click.option('--jobs', type=click.IntRange(min=1), default=None, help='平行執行的 fold 數 (覆寫 train.jobs)')
@click.option('--seed', type=click.IntRange(min=0), default=None, help='覆寫 train.seed')
@click.pass_context
@handle_errors
def crossval(ctx: click.Context, config_path: Path, manifest_path: Path, out_dir: Path,
             jobs: Optional[int], seed: Optional[int]) -> None:
    """分層 k-fold 交叉驗證，寫出報告、訓練紀錄與最佳 checkpoint"""
    cfg = load_config(config_path).with_overrides(train={"jobs": jobs, "seed": seed})
    manifest = Manifest.load(manifest_path)

    start = time.perf_counter()
    with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"), console=console) as progress:
        task = progress.add_task(f"{cfg.train.folds}-fold 交叉驗證中...", total=None)
        result = run_crossval(manifest, cfg)
        progress.update(task, description="✓ 交叉驗證完成")
    wall_clock = time.perf_counter() - start

    write_fold_artifacts(result, manifest, cfg, out_dir)
    report = build_report(result, cfg, wall_clock)
    report_path = out_dir / "report.json"
    report_path.write_text(report.to_json(), encoding="utf-8")

    table = Table(title="交叉驗證結果")
    table.add_column("Fold", style="cyan")
    for header in ("ACC ckpt: epoch", "acc", "auc", "AUC ckpt: epoch", "acc", "auc"):
        table.add_column(header, style="magenta")
    for row in report.folds:
        table.add_row(
            str(row.fold), str(row.best_acc_epoch), _fmt(row.best_acc_accuracy), _fmt(row.best_acc_auc),
            str(row.best_auc_epoch), _fmt(row.best_auc_accuracy), _fmt(row.best_auc_auc),
        )
    console.print(table)
    for mean in report.means:
        console.print(f"mean ({mean.variant}): accuracy={_fmt(mean.accuracy)} AUC={_fmt(mean.auc)}")
    console.print(f"\n[green]✓ 報告: {report_path}[/green] (trainable params {report.trainable_params:,})")


# --- eval ---

@cli.command(name="eval")
@click.option('--checkpoint', 'checkpoint_path', required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option('--manifest', 'manifest_path', required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option('--threshold', type=float, default=0.5, show_default=True, help='判為 ADHD 的分數門檻')
@click.option('--weights', 'weights_path', type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None, help='含 backbone 張量的 checkpoint')
@click.option('--roc-out', type=click.Path(dir_okay=False, path_type=Path), default=None, help='ROC CSV 路徑')
@click.option('--json-out', type=click.Path(dir_okay=False, path_type=Path), default=None, help='結果 JSON 路徑')
@click.pass_context
@handle_errors
def evaluate(ctx: click.Context, checkpoint_path: Path, manifest_path: Path, threshold: float,
             weights_path: Optional[Path], roc_out: Optional[Path], json_out: Optional[Path]) -> None:
    """以 checkpoint 評估 manifest：accuracy、AUC、混淆矩陣與 ROC CSV"""
    checkpoint = load_checkpoint(checkpoint_path)
    weights = load_checkpoint(weights_path).backbone_tensors if weights_path else None
    model = restore_model(checkpoint, weights)
    cfg = checkpoint_config(checkpoint)
    manifest = Manifest.load(manifest_path)
    data = VolumeRepository(
        manifest, cfg.model.input_extents, cfg.data.normalize, cfg.model.tensor_dtype, channels=cfg.model.in_channels,
    ).load_all()

    scores = evaluate_scores(model, data.x)
    cm = confusion(scores, data.labels, threshold)
    acc = accuracy(cm)
    auc_value: Optional[float] = None
    roc_path: Optional[Path] = None
    if 0 < int(data.labels.sum()) < len(data):
        curve = roc_curve(scores, data.labels)
        auc_value = auc(curve)
        roc_path = export_roc_csv(
            curve, roc_out or checkpoint_path.with_name(f"{checkpoint_path.stem}_roc.csv"), config_hash(cfg),
        )
    else:
        console.print("[yellow]⚠ 只有單一類別，AUC 與 ROC 無定義[/yellow]")

    table = Table(title="混淆矩陣")
    table.add_column("", style="cyan")
    table.add_column("預測 ADHD", style="magenta")
    table.add_column("預測 HV", style="magenta")
    table.add_row("實際 ADHD", str(cm.tp), str(cm.fn))
    table.add_row("實際 HV", str(cm.fp), str(cm.tn))
    console.print(table)
    console.print(f"accuracy={acc!r}")
    console.print(f"auc={auc_value!r}")
    if roc_path is not None:
        console.print(f"ROC: {roc_path}")

    if json_out is not None:
        report = EvalReport(
            checkpoint=str(checkpoint_path), config_hash=config_hash(cfg), n_samples=len(data),
            threshold=threshold, accuracy=acc, auc=auc_value, confusion=cm.to_dict(),
            roc_csv=str(roc_path) if roc_path else None,
        )
        json_out.parent.mkdir(parents=True, exist_ok=True)
        json_out.write_text(report.to_json(), encoding="utf-8")


# --- 統計 ---

def _backbone_config(preset: str, in_channels: int) -> BackboneConfig:
    return BackboneConfig.from_preset(preset, in_channels=in_channels)


@cli.command(name="count-params")
@click.option('--preset', type=click.Choice(PRESETS), default="resnet50-3d", show_default=True)
@click.option('--rank', type=click.IntRange(min=1), default=4, show_default=True)
@click.option('--in-channels', type=click.IntRange(min=1), default=2, show_default=True)
@click.option('--hidden', type=click.IntRange(min=1), default=HEAD_HIDDEN_UNITS, show_default=True)
@click.option('--exclude', multiple=True, help='不注入 adapter 的卷積名稱樣式 (可重複)')
@click.pass_context
@handle_errors
def count_params(ctx: click.Context, preset: str, rank: int, in_channels: int, hidden: int, exclude: Sequence[str]) -> None:
    """可訓練參數總數與逐層明細"""
    config = _backbone_config(preset, in_channels)
    report = param_count_from_config(config, rank, exclude, hidden)
    full = full_finetune_param_count(config, hidden)

    table = Table(title=f"{preset} r={rank} 可訓練參數")
    table.add_column("層", style="cyan")
    table.add_column("參數", style="magenta", justify="right")
    for name, count in report.breakdown.items():
        table.add_row(name, f"{count:,}")
    console.print(table)
    console.print(f"LoRA: {report.lora_total:,}")
    console.print(f"head: {report.head_total:,}")
    console.print(f"total: {report.total:,} ({report.millions:.3f} M; 參考值 {REFERENCE_LORA_TOTAL_M} M)")
    console.print(
        f"full fine-tuning: {full:,} ({full / 1e6:.2f} M; 參考值 {REFERENCE_FULL_FINETUNE_M} M), "
        f"{full / report.total:.1f}× LoRA"
    )


@cli.command()
@click.option('--preset', type=click.Choice(PRESETS), default="resnet50-3d", show_default=True)
@click.option('--extents', type=EXTENTS, default="128,128,128", show_default=True, help='輸入空間大小 D,H,W')
@click.option('--in-channels', type=click.IntRange(min=1), default=2, show_default=True)
@click.option('--hidden', type=click.IntRange(min=1), default=HEAD_HIDDEN_UNITS, show_default=True)
@click.option('--per-layer', is_flag=True, help='列出每個卷積的 MACs')
@click.pass_context
@handle_errors
def flops(ctx: click.Context, preset: str, extents: Tuple[int, int, int], in_channels: int, hidden: int, per_layer: bool) -> None:
    """單一樣本的 MACs 與 FLOPs (= 2 × MACs)"""
    report = flops_estimate(_backbone_config(preset, in_channels), extents, hidden)
    if per_layer:
        table = Table(title=f"{preset} @ {in_channels}×{'×'.join(map(str, extents))}")
        table.add_column("層", style="cyan")
        table.add_column("MACs", style="magenta", justify="right")
        for name, macs in report.per_layer.items():
            table.add_row(name, f"{macs:,}")
        console.print(table)
    console.print(f"MACs: {report.macs:,} ({report.gmacs:.3f} G)")
    console.print(f"FLOPs: {report.flops:,} ({report.tflops:.4f} T; 參考值 {REFERENCE_TFLOPS} T)")


# --- merge-lora ---

@cli.command(name="merge-lora")
@click.option('--checkpoint', 'checkpoint_path', required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option('--out', 'out_path', required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option('--weights', 'weights_path', type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None, help='含 backbone 張量的 checkpoint')
@click.pass_context
@handle_errors
def merge_lora(ctx: click.Context, checkpoint_path: Path, out_path: Path, weights_path: Optional[Path]) -> None:
    """把 adapter 合併進卷積權重，寫出不含 adapter 的完整 checkpoint"""
    checkpoint = load_checkpoint(checkpoint_path)
    if checkpoint.metadata.get("merged"):
        raise UsageFailure(f"{checkpoint_path} 已經是合併後的 checkpoint")
    weights = load_checkpoint(weights_path).backbone_tensors if weights_path else None
    merged = merge_adapters(restore_model(checkpoint, weights))
    metadata = {**checkpoint.metadata, "merged": True, "source_checkpoint": checkpoint_path.name}
    save_checkpoint(snapshot(merged, metadata, include_backbone=True), out_path)
    console.print(f"[green]✓ 已合併 {len(checkpoint.adapter_tensors) // 2} 個 adapter → {out_path}[/green]")


# --- gen-synth ---

@cli.command(name="gen-synth")
@click.option('--n', 'n_per_class', type=click.IntRange(min=1), default=50, show_default=True, help='每個類別的受試者數')
@click.option('--extents', type=EXTENTS, default="16,16,16", show_default=True)
@click.option('--seed', type=click.IntRange(min=0), default=0, show_default=True)
@click.option('--separation', type=click.FloatRange(min=0.0), default=2.0, show_default=True)
@click.option('--out', 'out_dir', required=True, type=click.Path(file_okay=False, path_type=Path))
@click.pass_context
@handle_errors
def gen_synth(ctx: click.Context, n_per_class: int, extents: Tuple[int, int, int], seed: int,
              separation: float, out_dir: Path) -> None:
    """產生合成的雙通道體積資料與 manifest"""
    manifest = synth_generate(n_per_class, extents, seed, separation, out_dir)
    console.print(f"[green]✓ {len(manifest)} 位受試者 → {out_dir / MANIFEST_NAME}[/green]")


if __name__ == "__main__":
    cli()
