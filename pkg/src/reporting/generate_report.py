import datetime
import logging
import os

import jinja2
import pandas as pd

from src.utils.errors import ModelIOError

logger = logging.getLogger(__name__)

TEMPLATE_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'template.html')


def generate_html_report(report_data, output_filename, template_path=TEMPLATE_PATH):
    """
    Renders the benchmark summary as an HTML page using a Jinja2 template.

    Args:
        report_data (dict): Report content. Recognized keys:
                            - report_title: Page title
                            - config: Dict of benchmark settings shown as a list
                            - summary: DataFrame, one row per experiment run
                            - medians: DataFrame of per-experiment medians (optional)
                            - timing_ratios: Dict of timing comparisons (optional)
                            - csv_files: List of error-series CSV filenames
        output_filename (str): Path of the HTML file to write.
        template_path (str): Path to the Jinja2 template.

    Returns:
        str: The output path.
    """
    if not os.path.exists(template_path):
        raise ModelIOError(f"report template not found at {template_path}")

    template_loader = jinja2.FileSystemLoader(searchpath=os.path.dirname(template_path))
    template_env = jinja2.Environment(loader=template_loader, autoescape=True)
    template = template_env.get_template(os.path.basename(template_path))

    context = {
        'report_title': report_data.get('report_title', "Empirical Gramian Benchmark Report"),
        'generation_time': datetime.datetime.now().strftime("%Y-%m-%d %H:%M:%S"),
        'config': report_data.get('config', {}),
        'timing_ratios': report_data.get('timing_ratios', {}),
        'csv_files': report_data.get('csv_files', []),
        'tables': {},
    }

    # Convert pandas DataFrames to HTML tables
    for key in ('summary', 'medians'):
        df = report_data.get(key)
        if isinstance(df, pd.DataFrame) and not df.empty:
            context['tables'][key] = df.to_html(classes='table', float_format=lambda v: f"{v:.4e}",
                                                index=(key == 'medians'))
        elif df is not None:
            logger.warning("Table '%s' is empty or not a DataFrame; skipping", key)

    html = template.render(context)
    try:
        with open(output_filename, 'w', encoding='utf-8') as handle:
            handle.write(html)
    except OSError as err:
        raise ModelIOError(f"cannot write report {output_filename}: {err}") from err
    logger.info("HTML report written to %s", output_filename)
    return output_filename
