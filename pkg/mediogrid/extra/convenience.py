#  convenience.py
#
#  Copyright 2024 The mediogrid authors
#
#  MIT License
#
#  Permission is hereby granted, free of charge, to any person obtaining a copy
#  of this software and associated documentation files (the "Software"), to deal
#  in the Software without restriction, including without limitation the rights
#  to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
#  copies of the Software, and to permit persons to whom the Software is
#  furnished to do so, subject to the following conditions:
#
#  The above copyright notice and this permission notice shall be included in all
#  copies or substantial portions of the Software.
#
#  THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
#  IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
#  FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
#  AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
#  LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
#  OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
#  SOFTWARE.
#
#

from ..config import Config
from ..simcore import RunResult, SimConfig, load_sim_config, run


def quick_load_simulation(config_path:str, days:int=1, seed:int=None, loss:float=None, period:float=None) -> SimConfig:
    """Returns SimConfig read from a config file, with optional seed, loss and period overrides"""
    if seed is not None:
        Config.set_seed(seed)
    if loss is not None:
        Config.set_loss_probability(loss)
    if period is not None:
        Config.set_metric_period(period)

    with open(config_path, "r") as _file:
        text = _file.read()

    return load_sim_config(text, days, seed)


def quick_run(config_path:str, days:int=1, seed:int=None) -> RunResult:
    """Runs the simulation described by a config file"""
    return run(quick_load_simulation(config_path, days, seed))
