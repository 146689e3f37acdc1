//! Minimal deterministic SVG writer for the two shipped plot kinds:
//! detection-distance-vs-speed curves and top-down trajectory views.

use std::fmt::Write as _;

pub struct SvgCanvas {
    width: f64,
    height: f64,
    body: String,
}

impl SvgCanvas {
    pub fn new(width: f64, height: f64) -> Self {
        SvgCanvas { width, height, body: String::new() }
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], color: &str, width: f64, dash: Option<&str>) {
        if points.len() < 2 {
            return;
        }
        let mut attr = String::new();
        for (x, y) in points {
            let _ = write!(attr, "{x:.2},{y:.2} ");
        }
        let dash = dash.map(|d| format!(" stroke-dasharray=\"{d}\"")).unwrap_or_default();
        let _ = writeln!(
            self.body,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"{dash} points=\"{attr}\"/>"
        );
    }

    pub fn circle(&mut self, x: f64, y: f64, r: f64, color: &str) {
        let _ = writeln!(self.body, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{r}\" fill=\"{color}\"/>");
    }

    pub fn rect_rotated(&mut self, cx: f64, cy: f64, w: f64, h: f64, angle_deg: f64, color: &str) {
        let _ = writeln!(
            self.body,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"none\" stroke=\"{color}\" transform=\"rotate({angle_deg:.2} {cx:.2} {cy:.2})\"/>",
            cx - w / 2.0,
            cy - h / 2.0
        );
    }

    pub fn text(&mut self, x: f64, y: f64, size: f64, content: &str) {
        let _ = writeln!(
            self.body,
            "<text x=\"{x:.1}\" y=\"{y:.1}\" font-family=\"sans-serif\" font-size=\"{size}\">{content}</text>"
        );
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, color: &str, width: f64) {
        let _ = writeln!(
            self.body,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{color}\" stroke-width=\"{width}\"/>"
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.width, self.height, self.width, self.height, self.body
        )
    }
}

/// Linear data-to-pixel mapping with padding.
pub struct Frame {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl Frame {
    pub fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let fx = (x - self.x_min) / (self.x_max - self.x_min).max(1e-12);
        let fy = (y - self.y_min) / (self.y_max - self.y_min).max(1e-12);
        (self.left + fx * self.width, self.top + (1.0 - fy) * self.height)
    }

    pub fn axes(&self, canvas: &mut SvgCanvas, x_label: &str, y_label: &str) {
        canvas.line(self.left, self.top, self.left, self.top + self.height, "black", 1.0);
        canvas.line(
            self.left,
            self.top + self.height,
            self.left + self.width,
            self.top + self.height,
            "black",
            1.0,
        );
        for i in 0..=4 {
            let fx = i as f64 / 4.0;
            let x_val = self.x_min + fx * (self.x_max - self.x_min);
            let y_val = self.y_min + fx * (self.y_max - self.y_min);
            canvas.text(
                self.left + fx * self.width - 10.0,
                self.top + self.height + 16.0,
                10.0,
                &format!("{x_val:.0}"),
            );
            canvas.text(
                self.left - 34.0,
                self.top + (1.0 - fx) * self.height + 4.0,
                10.0,
                &format!("{y_val:.0}"),
            );
        }
        canvas.text(self.left + self.width / 2.0 - 30.0, self.top + self.height + 32.0, 11.0, x_label);
        canvas.text(8.0, self.top - 8.0, 11.0, y_label);
    }
}
