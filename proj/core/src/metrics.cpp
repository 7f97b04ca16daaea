/*
 *  Copyright 2026 The FDI Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#include "fdi/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fdi {

std::vector<BucketAggregate> aggregate(const std::vector<MetricRow>& rows) {
    if (rows.empty()) throw std::invalid_argument("aggregate: no metric rows");
    std::vector<std::string> order;
    std::map<std::string, std::vector<const MetricRow*>> groups;
    for (const auto& r : rows) {
        if (!groups.count(r.bucket)) order.push_back(r.bucket);
        groups[r.bucket].push_back(&r);
    }
    std::vector<BucketAggregate> out;
    for (const auto& bucket : order) {
        const auto& g = groups[bucket];
        if (g.empty()) {
            std::cerr << "warning: empty metric group " << bucket << ", omitted\n";
            continue;
        }
        BucketAggregate a{bucket, 0, 0, 0, g.size(), 0};
        std::size_t finite = 0;
        for (const auto* r : g) {
            if (std::isinf(r->psnr)) {
                ++a.psnr_inf;
            } else {
                a.psnr_mean += r->psnr;
                ++finite;
            }
            a.ssim_mean += r->ssim;
            a.l1pct_mean += r->l1pct;
        }
        a.psnr_mean = finite ? a.psnr_mean / static_cast<double>(finite)
                             : std::numeric_limits<double>::infinity();
        a.ssim_mean /= static_cast<double>(g.size());
        a.l1pct_mean /= static_cast<double>(g.size());
        out.push_back(a);
    }
    return out;
}

namespace {

std::string fmt(double v, int prec = 4) {
    if (std::isinf(v)) return "inf";
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

}  // namespace

void write_metrics_csv(const std::vector<MetricRow>& rows,
                       const std::vector<BucketAggregate>& aggs, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_metrics_csv: cannot write " + path);
    os << "item,bucket,psnr,ssim,l1_pct\n";
    for (const auto& r : rows)
        os << r.item << "," << r.bucket << "," << fmt(r.psnr, 6) << "," << fmt(r.ssim, 6) << ","
           << fmt(r.l1pct, 6) << "\n";
    for (const auto& a : aggs)
        os << "aggregate," << a.bucket << "," << fmt(a.psnr_mean, 6) << "," << fmt(a.ssim_mean, 6)
           << "," << fmt(a.l1pct_mean, 6) << "\n";
}

std::string format_metric_table(const std::vector<BucketAggregate>& aggs) {
    std::ostringstream os;
    const int wb = 10, wv = 10;
    auto line = [&](const std::string& metric, auto get) {
        os << std::left << std::setw(8) << metric;
        for (const auto& a : aggs) os << std::right << std::setw(wv) << get(a);
        os << "\n";
    };
    os << std::left << std::setw(8) << "Mask";
    for (const auto& a : aggs) os << std::right << std::setw(wb) << a.bucket;
    os << "\n";
    line("PSNR", [](const BucketAggregate& a) { return fmt(a.psnr_mean, 2); });
    line("SSIM", [](const BucketAggregate& a) { return fmt(a.ssim_mean, 3); });
    line("l1(%)", [](const BucketAggregate& a) { return fmt(a.l1pct_mean, 2); });
    bool any_inf = false;
    for (const auto& a : aggs) any_inf |= a.psnr_inf > 0;
    if (any_inf) {
        os << "note: infinite PSNR entries excluded from means:";
        for (const auto& a : aggs)
            if (a.psnr_inf) os << " " << a.bucket << "=" << a.psnr_inf;
        os << "\n";
    }
    return os.str();
}

}  // namespace fdi
