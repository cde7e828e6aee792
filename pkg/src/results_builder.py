import pandas as pd

METRICS_COLUMNS = ['step', 'loss_seg', 'loss_G_adv', 'loss_D', 'r1']
REPORT_METRICS = ['miou', 'spectrum_distance']
ABLATION_COLUMNS = ['variant', 'miou', 'spectrum_distance']


def build_metrics_df(history):
    """
    Builds the per-step training metrics dataframe

    Args:
        history (list of dict): one record per train step

    Returns:
        pd.DataFrame: columns step, loss_seg, loss_G_adv, loss_D, r1
    """
    df = pd.DataFrame(history, columns=METRICS_COLUMNS)
    df['step'] = df['step'].astype('int64')
    return df


def write_metrics_csv(path, history, append=False):
    df = build_metrics_df(history)
    df.to_csv(path, index=False, mode='a' if append else 'w', header=not append)
    return df


def build_report_df(report):
    """
    Builds the evaluation report as metric,value rows

    Args:
        report (dict): metric name -> value

    Returns:
        pd.DataFrame:
    """
    return pd.DataFrame(
        [{'metric': name, 'value': report[name]} for name in REPORT_METRICS],
        columns=['metric', 'value'],
    )


def build_ablation_df(results):
    """
    Builds the ablation table

    Args:
        results (dict): variant name -> evaluation report

    Returns:
        pd.DataFrame: one row per variant
    """
    data = []
    for variant, report in results.items():
        data.append({
            'variant': variant,
            'miou': report['miou'],
            'spectrum_distance': report['spectrum_distance'],
        })
    return pd.DataFrame(data, columns=ABLATION_COLUMNS)
