package shop.cart;

import shop.catalog.Product;

public class CartLine {
    private final Product product;
    private final int qty;

    public CartLine(Product product, int qty) {
        this.product = product;
        this.qty = qty;
    }

    public Product getProduct() {
        return product;
    }

    public int subtotalCents() {
        return product.getPriceCents() * qty;
    }
}
